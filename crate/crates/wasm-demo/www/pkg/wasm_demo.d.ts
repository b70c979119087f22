/* tslint:disable */
/* eslint-disable */

/**
 * JSON array with one module run per control state.
 */
export function cqzeAmplitudes(m: number, n: number, eps_reflect: number, eps_block: number): string;

/**
 * Row-major `m_max × n_max` fidelities.
 */
export function fidelityGrid(m_max: number, n_max: number, eps_reflect: number, eps_block: number, samples: number, postselected: boolean): Float64Array;

/**
 * JSON `{arms, rows: [{time, values}]}`.
 */
export function weakTable(m: number, n: number, boundaries: string, cycle: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly cqzeAmplitudes: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly fidelityGrid: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly weakTable: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;

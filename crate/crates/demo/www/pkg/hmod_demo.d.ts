/* tslint:disable */
/* eslint-disable */

/**
 * Both annulus moduli for `n` radii in `[r_min, r_max]`.
 * Returns `[r, M4 horizontal, closed form, M4 vertical, closed form]` per radius.
 */
export function annulus_moduli(r_min: number, r_max: number, n: number, tol: number): Float64Array;

/**
 * Energy of the leafwise-renormalized density `ρ₀(1 + εg)` on the
 * horizontal annulus family, for `n` values of `ε` in `[-eps_max, eps_max]`.
 * Returns `[ε, energy / M4 − 1]` per value.
 */
export function perturbation_energy(g: string, r: number, eps_max: number, n: number, tol: number): Float64Array;

/**
 * The `q₀` coefficient as text, for the trace form.
 */
export function q0_text(): string;

/**
 * Traces the horizontal trajectory of `q` from `(x + iy, t)`.
 * Returns `[s, x, y, t]` per sample.
 */
export function trace(q: string, x: number, y: number, t: number, orientation: number, max_length: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly annulus_moduli: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly perturbation_energy: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly q0_text: () => [number, number];
    readonly trace: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
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

/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const annulus_moduli: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const perturbation_energy: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const q0_text: () => [number, number];
export const trace: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;

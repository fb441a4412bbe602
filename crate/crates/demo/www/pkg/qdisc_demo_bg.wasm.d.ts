/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_puresolve_free: (a: number, b: number) => void;
export const analyticCurve: (a: number, b: number, c: number) => [number, number, number, number];
export const puresolve_action: (a: number, b: number) => [number, number, number, number];
export const puresolve_curve: (a: number) => [number, number];
export const puresolve_new: (a: number, b: number, c: number) => [number, number, number];
export const puresolve_simulate: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;

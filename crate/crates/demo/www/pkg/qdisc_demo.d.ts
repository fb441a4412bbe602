/* tslint:disable */
/* eslint-disable */

/**
 * A solved locally adaptive policy held on the JS side between calls.
 */
export class PureSolve {
    free(): void;
    [Symbol.dispose](): void;
    action(q: number): string;
    curve(): string;
    constructor(x_deg: number, eps: number, grid_points: number);
    simulate(q0: number, trials: number, seed: number): string;
}

export function analyticCurve(x_deg: number, eps: number, samples: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_puresolve_free: (a: number, b: number) => void;
    readonly analyticCurve: (a: number, b: number, c: number) => [number, number, number, number];
    readonly puresolve_action: (a: number, b: number) => [number, number, number, number];
    readonly puresolve_curve: (a: number) => [number, number];
    readonly puresolve_new: (a: number, b: number, c: number) => [number, number, number];
    readonly puresolve_simulate: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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

/* tslint:disable */
/* eslint-disable */

export class Se2Demo {
    free(): void;
    [Symbol.dispose](): void;
    diffuse(i: number, j: number, slice: number, tau: number): Float64Array;
    eigenvalue(k: number): number;
    eigenvector(k: number): Float64Array;
    nEdges(): number;
    nVertices(): number;
    /**
     * `nx × nx × n_orient` grid; ε is the flag value itself (ε² = 0.1 ↔ 0.316).
     */
    constructor(nx: number, n_orient: number, epsilon: number, alpha: number);
    rotationError(): number;
    /**
     * Fraction of neighbours within the same orientation slice.
     */
    sameSliceRatio(): number;
}

export function distanceField(epsilon: number, xi: number, theta0: number, theta: number, res: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_se2demo_free: (a: number, b: number) => void;
    readonly distanceField: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly se2demo_diffuse: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly se2demo_eigenvalue: (a: number, b: number) => [number, number, number];
    readonly se2demo_eigenvector: (a: number, b: number) => [number, number, number, number];
    readonly se2demo_nEdges: (a: number) => number;
    readonly se2demo_nVertices: (a: number) => number;
    readonly se2demo_new: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly se2demo_rotationError: (a: number) => [number, number, number];
    readonly se2demo_sameSliceRatio: (a: number) => number;
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

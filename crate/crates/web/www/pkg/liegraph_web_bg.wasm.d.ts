/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_se2demo_free: (a: number, b: number) => void;
export const distanceField: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const se2demo_diffuse: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const se2demo_eigenvalue: (a: number, b: number) => [number, number, number];
export const se2demo_eigenvector: (a: number, b: number) => [number, number, number, number];
export const se2demo_nEdges: (a: number) => number;
export const se2demo_nVertices: (a: number) => number;
export const se2demo_new: (a: number, b: number, c: number, d: number) => [number, number, number];
export const se2demo_rotationError: (a: number) => [number, number, number];
export const se2demo_sameSliceRatio: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;

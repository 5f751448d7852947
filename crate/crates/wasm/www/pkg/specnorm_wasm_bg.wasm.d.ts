/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_rendered_free: (a: number, b: number) => void;
export const radii_curve: (a: number, b: number) => [number, number, number, number];
export const reconstruct: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number, j: number) => [number, number, number, number];
export const render: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
export const rendered_meta: (a: number) => [number, number];
export const rendered_pixels: (a: number) => [number, number];
export const rendered_size: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_start: () => void;

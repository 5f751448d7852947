/* tslint:disable */
/* eslint-disable */

/**
 * A rendered acquisition: 8-bit pixels plus what the page needs to score it.
 */
export class Rendered {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * `{params, truth, light}`.
     */
    readonly meta: string;
    /**
     * Row-major grayscale.
     */
    readonly pixels: Uint8Array;
    readonly size: number;
}

/**
 * `{kappa, r_minus, r_plus}` arrays over `samples` values of κ in (0, 1),
 * camera at height `v_z`.
 */
export function radii_curve(v_z: number, samples: number): string;

/**
 * Reconstructs the whole 8-bit image. `intrinsics` is `[fx, fy, cx, cy]`,
 * `truth` an optional plane normal to score against, `blur` ≤ 0 picks the
 * smoothing from the image noise.
 */
export function reconstruct(pixels: Uint8Array, width: number, height: number, intrinsics: Float64Array, isovalue: number, blur: number, truth?: Float64Array | null): string;

/**
 * Renders with defaults except for the given parameters. Slant in degrees.
 */
export function render(size: number, slant_deg: number, roughness: number, noise: number, light_offset: number, seed: number): Rendered;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_rendered_free: (a: number, b: number) => void;
    readonly radii_curve: (a: number, b: number) => [number, number, number, number];
    readonly reconstruct: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number, j: number) => [number, number, number, number];
    readonly render: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
    readonly rendered_meta: (a: number) => [number, number];
    readonly rendered_pixels: (a: number) => [number, number];
    readonly rendered_size: (a: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
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

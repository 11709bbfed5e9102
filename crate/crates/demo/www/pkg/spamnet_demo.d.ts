/* tslint:disable */
/* eslint-disable */

/**
 * Colour-histogram and HOG view of one image.
 */
export class Analysis {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * 64 normalised colour-bin masses, red-major.
     */
    bins(): Float64Array;
    cells_per_side(): number;
    /**
     * Unnormalised 9-bin orientation histograms, one per 8x8 cell, row-major.
     */
    hog_cells(): Float32Array;
    is_spam(): boolean;
    /**
     * Mass of the `top_k` fullest bins.
     */
    score(): number;
    /**
     * The 56x56 image the features were computed on, as RGBA.
     */
    thumbnail(): Uint8Array;
}

/**
 * Resizes the RGBA image to 56x56 and runs the histogram detector and HOG on it.
 */
export function analyze(rgba: Uint8Array, width: number, height: number, top_k: number, tau: number): Analysis;

/**
 * Side of every image the demo hands back.
 */
export function image_size(): number;

/**
 * A synthetic spam or ham image, resized to the network input and returned as RGBA.
 */
export function render_synthetic(spam: boolean, seed: number, index: number): Uint8Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_analysis_free: (a: number, b: number) => void;
    readonly analysis_bins: (a: number) => [number, number];
    readonly analysis_cells_per_side: (a: number) => number;
    readonly analysis_hog_cells: (a: number) => [number, number];
    readonly analysis_is_spam: (a: number) => number;
    readonly analysis_score: (a: number) => number;
    readonly analysis_thumbnail: (a: number) => [number, number];
    readonly analyze: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
    readonly image_size: () => number;
    readonly render_synthetic: (a: number, b: number, c: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
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

/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_analysis_free: (a: number, b: number) => void;
export const analysis_bins: (a: number) => [number, number];
export const analysis_cells_per_side: (a: number) => number;
export const analysis_hog_cells: (a: number) => [number, number];
export const analysis_is_spam: (a: number) => number;
export const analysis_score: (a: number) => number;
export const analysis_thumbnail: (a: number) => [number, number];
export const analyze: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
export const image_size: () => number;
export const render_synthetic: (a: number, b: number, c: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;

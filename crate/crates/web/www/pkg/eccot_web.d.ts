/* tslint:disable */
/* eslint-disable */

/**
 * Fits the topic model on a seeded synthetic corpus of three themes.
 */
export function fit_topics(seed: number, num_topics: number, lambda: number, epochs: number): string;

/**
 * Trains, scores every chain, and drops the lowest `tau` fraction.
 */
export function rank_truncate(seed: number, epochs: number, tau: number): string;

/**
 * Trains the projection head on synthetic chains; returns the per-epoch curve.
 */
export function train_causal(seed: number, margin: number, epochs: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly fit_topics: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly rank_truncate: (a: number, b: number, c: number) => [number, number, number, number];
    readonly train_causal: (a: number, b: number, c: number) => [number, number, number, number];
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

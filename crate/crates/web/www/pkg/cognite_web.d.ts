/* tslint:disable */
/* eslint-disable */

/**
 * A live module the player drives one action at a time.
 */
export class Playground {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * `action` is JSON: `{"move":"NE"}`, `"fire"`, `"touch"`, `"push_pull"`
     * or `"wait"`.
     */
    act(action: string): string;
    constructor(shape_id: number, seed: bigint);
    rules(): string;
    view(): string;
}

/**
 * Fly one mission. `rules` is `empty`, `trained` (bots train first, with
 * `episodes` per module) or `oracle`.
 */
export function run_mission(seed: bigint, rules: string, episodes: number): string;

/**
 * Train a bot on one module and report its learning curve and best rules.
 */
export function train_bot(shape_id: number, seed: bigint, episodes: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_playground_free: (a: number, b: number) => void;
    readonly playground_act: (a: number, b: number, c: number) => [number, number, number, number];
    readonly playground_new: (a: number, b: bigint) => [number, number, number];
    readonly playground_rules: (a: number) => [number, number];
    readonly playground_view: (a: number) => [number, number];
    readonly run_mission: (a: bigint, b: number, c: number, d: number) => [number, number, number, number];
    readonly train_bot: (a: number, b: bigint, c: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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

import {
  ConditionKind,
  ConditionMode,
  RecommendRequest,
  RecommendResponse,
  ServiceClient,
} from './api.js';

export type HistoryEntry = {
  readonly request: Readonly<RecommendRequest>;
  readonly response: RecommendResponse;
  readonly at: number;
};

export type QueryState = {
  topPath: string | null;
  topFile: Blob | null;
  topFileName: string | null;
  k: number;
  kind: ConditionKind;
  target: string | null;
  mode: ConditionMode;
  minPosterior: number;
  lastResponse: RecommendResponse | null;
  history: ReadonlyArray<HistoryEntry>;
};

export function initialState(): QueryState {
  return {
    topPath: null,
    topFile: null,
    topFileName: null,
    k: 5,
    kind: 'none',
    target: null,
    mode: 'filter',
    minPosterior: 0,
    lastResponse: null,
    history: [],
  };
}

export function setCondition(
  state: QueryState,
  kind: ConditionKind,
  target: string | null,
  mode: ConditionMode,
): QueryState {
  return { ...state, kind, target, mode };
}

export function setK(state: QueryState, k: number): QueryState {
  if (!Number.isInteger(k) || k < 1) throw new Error(`invalid k: ${k}`);
  return { ...state, k };
}

export function buildRequest(state: QueryState): RecommendRequest {
  if (!state.topPath && !state.topFile) {
    throw new Error('select a query top first');
  }
  const req: RecommendRequest = {
    k: state.k,
    kind: state.kind,
    mode: state.mode,
  };
  if (state.topFile) {
    req.topFile = state.topFile;
    req.topFileName = state.topFileName ?? 'query.png';
  } else if (state.topPath) {
    req.topPath = state.topPath;
  }
  if (state.kind !== 'none') {
    req.target = state.target ?? undefined;
    req.minPosterior = state.minPosterior;
  }
  return req;
}

// One request in flight per session; later submissions queue behind it so
// history order always matches submission order.
let pending: Promise<unknown> = Promise.resolve();

export async function submitQuery(
  state: QueryState,
  client: ServiceClient,
): Promise<QueryState> {
  const request = buildRequest(state);
  const run = pending.then(() => client.recommend(request));
  pending = run.catch(() => undefined);
  // On failure the caller keeps the old state untouched (history included).
  const response = await run;
  const entry: HistoryEntry = { request, response, at: Date.now() };
  return {
    ...state,
    lastResponse: response,
    history: [...state.history, entry],
  };
}

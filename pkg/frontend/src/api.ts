// Typed client for the recommendation service. All business logic lives
// server-side; this module only shuttles JSON.

export type StylePattern = {
  id: number;
  name: string;
  warm_cool: number;
  soft_hard: number;
};

export type EventCategory = {
  id: number;
  name: string;
};

export type StyleMatchPayload = {
  d_star: number;
  matched_triplet: number;
  permutation: number;
  pattern: number;
  pattern_name: string;
  accepted: boolean;
};

export type Proposal = {
  bottom_id: string;
  score: number;
  style: StyleMatchPayload | null;
  event_posterior: number[] | null;
};

export type RecommendResponse = {
  query_id: string;
  k: number;
  shortfall: number;
  proposals: Proposal[];
};

export type ConditionKind = 'none' | 'style' | 'event';
export type ConditionMode = 'filter' | 'rerank';

export type RecommendRequest = {
  topPath?: string;
  topFile?: Blob;
  topFileName?: string;
  k: number;
  kind: ConditionKind;
  target?: string;
  mode: ConditionMode;
  minPosterior?: number;
};

export class ApiError extends Error {
  constructor(public readonly status: number, detail: string) {
    super(detail);
    this.name = 'ApiError';
  }
}

async function parseJson(res: Response): Promise<unknown> {
  const text = await res.text();
  try {
    return JSON.parse(text);
  } catch {
    throw new ApiError(res.status, `malformed JSON from server (${res.status})`);
  }
}

async function checkOk(res: Response): Promise<unknown> {
  const body = await parseJson(res);
  if (!res.ok) {
    const detail =
      body && typeof body === 'object' && 'detail' in body
        ? String((body as { detail: unknown }).detail)
        : `request failed (${res.status})`;
    throw new ApiError(res.status, detail);
  }
  return body;
}

export class ServiceClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, '') + path;
  }

  async getPatterns(): Promise<StylePattern[]> {
    const res = await this.fetchImpl(this.url('/patterns'));
    return (await checkOk(res)) as StylePattern[];
  }

  async getEvents(): Promise<EventCategory[]> {
    const res = await this.fetchImpl(this.url('/events'));
    return (await checkOk(res)) as EventCategory[];
  }

  /** POST /recommend with multipart form fields mirroring the request. */
  async recommend(req: RecommendRequest): Promise<RecommendResponse> {
    const form = new FormData();
    form.set('k', String(req.k));
    form.set('kind', req.kind);
    form.set('mode', req.mode);
    if (req.kind !== 'none') {
      form.set('target', req.target ?? '');
      form.set('min_posterior', String(req.minPosterior ?? 0));
    }
    if (req.topFile) {
      form.set('top', req.topFile, req.topFileName ?? 'query.png');
    } else if (req.topPath) {
      form.set('top_path', req.topPath);
    }
    const res = await this.fetchImpl(this.url('/recommend'), {
      method: 'POST',
      body: form,
    });
    const body = (await checkOk(res)) as RecommendResponse;
    if (!Array.isArray(body.proposals)) {
      throw new ApiError(res.status, 'malformed recommendation payload');
    }
    return body;
  }
}

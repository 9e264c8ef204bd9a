import type { DecisionPayload, ReviewItem, ServerStats, Taxonomy } from './types.js'

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message)
  }
}

async function errorMessage(res: Response): Promise<string> {
  try {
    const body = (await res.json()) as { error?: string }
    return body.error ?? res.statusText
  } catch {
    return res.statusText
  }
}

/** Thin typed client over the review service HTTP API. */
export class ReviewApi {
  constructor(
    private readonly base: string = '',
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  /** Next pending item, or null when the queue is empty (204). */
  async fetchNext(): Promise<ReviewItem | null> {
    const res = await this.fetchFn(`${this.base}/api/items/next`)
    if (res.status === 204) return null
    if (!res.ok) throw new ApiError(res.status, await errorMessage(res))
    return (await res.json()) as ReviewItem
  }

  async submitDecision(id: string, payload: DecisionPayload): Promise<ReviewItem> {
    const res = await this.fetchFn(`${this.base}/api/items/${id}/decision`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(payload),
    })
    if (!res.ok) throw new ApiError(res.status, await errorMessage(res))
    return (await res.json()) as ReviewItem
  }

  async fetchStats(): Promise<ServerStats> {
    const res = await this.fetchFn(`${this.base}/api/stats`)
    if (!res.ok) throw new ApiError(res.status, await errorMessage(res))
    return (await res.json()) as ServerStats
  }

  async fetchTaxonomy(): Promise<Taxonomy> {
    const res = await this.fetchFn(`${this.base}/taxonomy.json`)
    if (!res.ok) throw new ApiError(res.status, await errorMessage(res))
    return (await res.json()) as Taxonomy
  }

  async triggerExport(): Promise<{ count: number; out_path: string }> {
    const res = await this.fetchFn(`${this.base}/api/export`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: '{}',
    })
    if (!res.ok) throw new ApiError(res.status, await errorMessage(res))
    return (await res.json()) as { count: number; out_path: string }
  }
}

import { describe, expect, it } from 'vitest'

import { ApiError, ReviewApi } from '../src/api.js'
import { ReviewSession, meanDurationMs, validateDecision } from '../src/state.js'
import type { DefectTag, ReviewItem } from '../src/types.js'

function item(id: string): ReviewItem {
  return {
    id,
    status: 'pending',
    qa: { verdict: 'needs_review' },
    photo_url: `/api/items/${id}/photo`,
    mask_url: `/api/items/${id}/mask`,
    overlay_url: `/api/items/${id}/overlay`,
    defect_tags: [],
    note: '',
  }
}

/** In-memory fake of the service with the same validation rules. */
class FakeApi {
  queue: ReviewItem[]
  decisions: Array<{ id: string; verdict: string; tags: string[]; duration_ms: number }> = []
  failWith: number | null = null
  calls = 0

  constructor(ids: string[]) {
    this.queue = ids.map(item)
  }

  async fetchNext(): Promise<ReviewItem | null> {
    return this.queue[0] ?? null
  }

  async submitDecision(
    id: string,
    payload: { verdict: 'accept' | 'reject'; tags: DefectTag[]; duration_ms: number },
  ): Promise<ReviewItem> {
    this.calls += 1
    if (this.failWith !== null) {
      throw new ApiError(this.failWith, 'injected failure')
    }
    if (payload.verdict === 'reject' && payload.tags.length === 0) {
      throw new ApiError(400, 'a reject decision needs at least one defect tag')
    }
    this.decisions.push({ id, ...payload })
    this.queue = this.queue.filter((q) => q.id !== id)
    return { ...item(id), status: payload.verdict === 'accept' ? 'accepted' : 'rejected' }
  }
}

const asApi = (fake: FakeApi) => fake as unknown as ReviewApi

describe('validateDecision', () => {
  it('blocks rejects without tags', () => {
    expect(validateDecision('reject', new Set())).toMatch(/at least one defect tag/)
  })

  it('allows rejects with a tag', () => {
    expect(validateDecision('reject', new Set<DefectTag>(['hallucination']))).toBeNull()
  })

  it('blocks accepts carrying mask-defect tags', () => {
    expect(validateDecision('accept', new Set<DefectTag>(['missing_mask']))).toMatch(
      /missing_mask/,
    )
    expect(validateDecision('accept', new Set<DefectTag>(['size_mismatch']))).toMatch(
      /size_mismatch/,
    )
  })

  it('allows plain accepts', () => {
    expect(validateDecision('accept', new Set())).toBeNull()
  })
})

describe('ReviewSession', () => {
  it('loads items and advances after an accept', async () => {
    const fake = new FakeApi(['a', 'b'])
    const session = new ReviewSession(asApi(fake))
    await session.loadNext()
    expect(session.state.item?.id).toBe('a')
    const outcome = await session.decide('accept')
    expect(outcome.kind).toBe('submitted')
    expect(session.state.item?.id).toBe('b')
    expect(session.state.session.decided).toBe(1)
  })

  it('never sends an invalid reject to the server', async () => {
    const fake = new FakeApi(['a'])
    const session = new ReviewSession(asApi(fake))
    await session.loadNext()
    const outcome = await session.decide('reject')
    expect(outcome.kind).toBe('blocked')
    expect(fake.calls).toBe(0)
    expect(session.state.item?.id).toBe('a') // still loaded
    expect(session.state.message).toMatch(/defect tag/)
  })

  it('sends the selected tags with a reject', async () => {
    const fake = new FakeApi(['a'])
    const session = new ReviewSession(asApi(fake))
    await session.loadNext()
    session.toggleTag('hallucination')
    session.toggleTag('wrong_viewpoint')
    const outcome = await session.decide('reject')
    expect(outcome.kind).toBe('submitted')
    expect(fake.decisions[0]?.tags.sort()).toEqual(['hallucination', 'wrong_viewpoint'])
  })

  it('measures duration client-side from serve to decide', async () => {
    let now = 10_000
    const fake = new FakeApi(['a'])
    const session = new ReviewSession(asApi(fake), () => now)
    await session.loadNext()
    now += 4200
    await session.decide('accept')
    expect(fake.decisions[0]?.duration_ms).toBe(4200)
    expect(meanDurationMs(session.state.session)).toBe(4200)
  })

  it('rolls back the optimistic advance on a server error', async () => {
    const fake = new FakeApi(['a'])
    const session = new ReviewSession(asApi(fake))
    await session.loadNext()
    fake.failWith = 500
    await expect(session.decide('accept')).rejects.toThrow('injected failure')
    expect(session.state.item?.id).toBe('a') // rolled back
    expect(session.state.session.decided).toBe(0)
  })

  it('refetches on a conflict instead of failing', async () => {
    const fake = new FakeApi(['a', 'b'])
    const session = new ReviewSession(asApi(fake))
    await session.loadNext()
    fake.failWith = 409
    const outcome = await session.decide('accept')
    expect(outcome.kind).toBe('conflict')
    fake.failWith = null
    expect(session.state.item).not.toBeNull()
  })

  it('flags the done state on an empty queue', async () => {
    const fake = new FakeApi([])
    const session = new ReviewSession(asApi(fake))
    await session.loadNext()
    expect(session.state.done).toBe(true)
    expect(session.state.item).toBeNull()
  })

  it('clamps the overlay alpha to [0, 1]', () => {
    const session = new ReviewSession(asApi(new FakeApi([])))
    session.setAlpha(1.7)
    expect(session.state.alpha).toBe(1)
    session.setAlpha(-2)
    expect(session.state.alpha).toBe(0)
  })
})

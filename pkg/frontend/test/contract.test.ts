/**
 * Contract test against a live review service: a scripted session reviews
 * ten queued items the way the UI would (7 accepts, 3 rejects with tags),
 * then the server's own state must agree, and an invalid reject must be
 * stopped on the client before any request is made.
 */

import { type ChildProcess, spawn } from 'node:child_process'
import { mkdtempSync, writeFileSync } from 'node:fs'
import { tmpdir } from 'node:os'
import { join } from 'node:path'
import { afterAll, beforeAll, describe, expect, it } from 'vitest'

import { ReviewApi } from '../src/api.js'
import { ReviewSession } from '../src/state.js'

let proc: ChildProcess
let base: string
let fetchCount = 0

const countingFetch: typeof fetch = (input, init) => {
  fetchCount += 1
  return fetch(input, init)
}

beforeAll(async () => {
  const dir = mkdtempSync(join(tmpdir(), 'review-ui-'))
  const manifest = join(dir, 'qa_manifest.jsonl')
  const lines = Array.from({ length: 10 }, (_, i) =>
    JSON.stringify({
      id: `fixture${String(i).padStart(2, '0')}`,
      photo_path: join(dir, `p${i}.png`),
      mask_path: join(dir, `m${i}.png`),
      verdict: 'needs_review',
      palette_leakage_fraction: 0.01 * i,
      unmapped_fraction: 0,
      misalignment_score: 0,
      suggested_tags: i >= 7 ? ['misalignment'] : [],
    }),
  )
  writeFileSync(manifest, lines.join('\n') + '\n')

  proc = spawn(
    'regenforge',
    [
      'review',
      'serve',
      '--manifest',
      manifest,
      '--log',
      join(dir, 'review.bin'),
      '--addr',
      '127.0.0.1:0',
      '--export',
      join(dir, 'accepted.jsonl'),
    ],
    { stdio: ['ignore', 'pipe', 'pipe'] },
  )
  base = await new Promise<string>((resolve, reject) => {
    let buffer = ''
    proc.stdout!.on('data', (chunk: Buffer) => {
      buffer += chunk.toString()
      const line = buffer.split('\n')[0]
      if (line && line.includes('addr')) {
        resolve(`http://${(JSON.parse(line) as { addr: string }).addr}`)
      }
    })
    proc.on('error', reject)
    proc.on('exit', (code) => reject(new Error(`service exited early: ${code}`)))
    setTimeout(() => reject(new Error('service did not start in time')), 15_000)
  })
}, 20_000)

afterAll(() => {
  proc?.kill()
})

describe('scripted review session against the live service', () => {
  it('reviews 10 items (7 accept, 3 reject) and the server state matches', async () => {
    const api = new ReviewApi(base, countingFetch)
    const session = new ReviewSession(api)
    await session.loadNext()

    let accepted = 0
    let rejected = 0
    const decidedIds: string[] = []
    while (session.state.item !== null) {
      const current = session.state.item
      decidedIds.push(current.id)

      if (rejected < 3 && (current.qa.suggested_tags?.length ?? 0) > 0) {
        // Reject path: first try without a tag; the client must block it
        // before anything goes on the wire.
        const before = fetchCount
        const blocked = await session.decide('reject')
        expect(blocked.kind).toBe('blocked')
        expect(fetchCount).toBe(before)
        expect(session.state.item?.id).toBe(current.id)

        session.toggleTag('misalignment')
        session.toggleTag('wrong_viewpoint')
        const outcome = await session.decide('reject', 'scripted reject')
        expect(outcome.kind).toBe('submitted')
        rejected += 1
      } else {
        const outcome = await session.decide('accept')
        expect(outcome.kind).toBe('submitted')
        accepted += 1
      }
    }

    expect(session.state.done).toBe(true)
    expect(decidedIds).toHaveLength(10)
    expect(new Set(decidedIds).size).toBe(10)
    expect(accepted).toBe(7)
    expect(rejected).toBe(3)
    expect(session.state.session.decided).toBe(10)

    // The server's materialized state must agree with the scripted session.
    const stats = await api.fetchStats()
    expect(stats.pending).toBe(0)
    expect(stats.accepted).toBe(7)
    expect(stats.rejected).toBe(3)
    expect(stats.decided).toBe(10)
    expect(stats.acceptance_rate_reviewed).toBeCloseTo(70.0, 5)

    const exported = await api.triggerExport()
    expect(exported.count).toBe(7)
  }, 30_000)

  it('serves the taxonomy the legend is built from', async () => {
    const api = new ReviewApi(base)
    const taxonomy = await api.fetchTaxonomy()
    expect(taxonomy.classes).toHaveLength(23)
    expect(taxonomy.classes[0]?.name).toBe('American Mountain-Ash')
    expect(taxonomy.ignore_index).toBe(255)
  })

  it('rejects an invalid payload server-side too (double safety)', async () => {
    // Craft the invalid request the UI refuses to send; the server must
    // also refuse it, so the client mirror never drifts ahead of reality.
    const res = await fetch(`${base}/api/items/fixture00/decision`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ verdict: 'reject', tags: [] }),
    })
    expect([400, 409]).toContain(res.status) // 409 once the item is decided
    const body = (await res.json()) as { error?: string }
    expect(body.error).toBeTruthy()
  })
})

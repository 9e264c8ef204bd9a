import { ReviewApi } from './api.js'
import { HOTKEY_LEGEND, actionForKey } from './hotkeys.js'
import { colourise, composite, idsFromGreyscale, presentClassIds } from './overlay.js'
import { ReviewSession } from './state.js'
import { DEFECT_TAGS, type DefectTag, type ReviewItem, type Taxonomy } from './types.js'

const api = new ReviewApi('')
const session = new ReviewSession(api)

let taxonomy: Taxonomy
let photoPixels: Uint8ClampedArray | null = null
let maskColours: Uint8ClampedArray | null = null
let maskIds: Uint8Array | null = null
let frame: { w: number; h: number } | null = null

const $ = <T extends HTMLElement>(id: string): T => document.getElementById(id) as T

async function imageData(url: string): Promise<ImageData> {
  const blob = await (await fetch(url)).blob()
  const bitmap = await createImageBitmap(blob)
  const canvas = document.createElement('canvas')
  canvas.width = bitmap.width
  canvas.height = bitmap.height
  const ctx = canvas.getContext('2d', { willReadFrequently: true })!
  ctx.drawImage(bitmap, 0, 0)
  return ctx.getImageData(0, 0, bitmap.width, bitmap.height)
}

async function loadPixels(item: ReviewItem): Promise<void> {
  const [photo, mask] = await Promise.all([imageData(item.photo_url), imageData(item.mask_url)])
  photoPixels = photo.data
  maskIds = idsFromGreyscale(mask.data)
  maskColours = colourise(maskIds, taxonomy)
  frame = { w: photo.width, h: photo.height }
}

function drawOverlay(): void {
  if (!photoPixels || !maskColours || !frame) return
  const canvas = $<HTMLCanvasElement>('view')
  canvas.width = frame.w
  canvas.height = frame.h
  const blended = composite(photoPixels, maskColours, session.state.alpha)
  const pixels = new Uint8ClampedArray(blended) // fresh ArrayBuffer for ImageData
  canvas.getContext('2d')!.putImageData(new ImageData(pixels, frame.w, frame.h), 0, 0)
  $('alpha-value').textContent = session.state.alpha.toFixed(1)
}

function renderLegend(): void {
  const legend = $('legend')
  legend.replaceChildren()
  if (!maskIds) return
  for (const id of presentClassIds(maskIds, taxonomy)) {
    const cls = taxonomy.classes[id]
    if (!cls) continue
    const row = document.createElement('div')
    row.className = 'legend-row'
    const swatch = document.createElement('span')
    swatch.className = 'swatch'
    swatch.style.background = `rgb(${cls.colour.join(',')})`
    row.append(swatch, document.createTextNode(` ${cls.name}`))
    legend.append(row)
  }
}

function renderTags(): void {
  const box = $('tags')
  box.replaceChildren()
  DEFECT_TAGS.forEach((tag, i) => {
    const chip = document.createElement('button')
    chip.className = 'tag' + (session.state.selectedTags.has(tag) ? ' on' : '')
    chip.textContent = `${i + 1} ${tag}`
    chip.onclick = () => {
      session.toggleTag(tag)
      render()
    }
    box.append(chip)
  })
  $('tags-panel').classList.toggle('armed', session.state.rejectMode)
}

function renderStats(): void {
  const s = session.state.session
  const mean = s.decided ? (s.totalDurationMs / s.decided / 1000).toFixed(1) : '-'
  $('session-stats').textContent =
    `${s.decided} decided (${s.accepted} accepted, ${s.rejected} rejected), mean ${mean}s/sample`
}

function render(): void {
  const { item, done, message } = session.state
  $('done-screen').hidden = !done
  $('review-screen').hidden = done || item === null
  $('message').textContent = message
  renderStats()
  if (item === null) return
  $('item-id').textContent = item.id
  const qa = item.qa
  $('qa-line').textContent =
    `QA: ${qa.verdict ?? '?'} leak ${(qa.palette_leakage_fraction ?? 0).toFixed(3)} ` +
    `unmapped ${(qa.unmapped_fraction ?? 0).toFixed(3)} ` +
    `misalign ${(qa.misalignment_score ?? 0).toFixed(1)} ` +
    (qa.suggested_tags?.length ? `suggested: ${qa.suggested_tags.join(', ')}` : '')
  renderTags()
  renderLegend()
  drawOverlay()
}

async function advance(): Promise<void> {
  const item = await session.loadNext()
  if (item !== null) {
    await loadPixels(item)
  } else {
    photoPixels = maskColours = null
    maskIds = null
  }
  render()
}

async function handle(actionKey: string): Promise<void> {
  const action = actionForKey(actionKey)
  if (action === null) return
  switch (action.kind) {
    case 'accept':
      if (session.state.item) {
        await session.decide('accept')
        if (session.state.item) await loadPixels(session.state.item)
      }
      break
    case 'toggle-reject-mode':
      session.state.rejectMode = !session.state.rejectMode
      session.state.message = session.state.rejectMode
        ? 'reject mode: pick tags (1-8 or S), then Enter'
        : ''
      break
    case 'confirm-reject':
      if (session.state.rejectMode && session.state.item) {
        const outcome = await session.decide('reject')
        if (outcome.kind !== 'blocked' && session.state.item) {
          await loadPixels(session.state.item)
        }
      }
      break
    case 'toggle-tag':
      session.toggleTag(action.tag)
      break
    case 'suggested-tags':
      for (const tag of session.state.item?.qa.suggested_tags ?? []) {
        if ((DEFECT_TAGS as readonly string[]).includes(tag)) {
          session.state.selectedTags.add(tag as DefectTag)
        }
      }
      break
    case 'alpha-delta':
      session.setAlpha(session.state.alpha + action.delta)
      drawOverlay()
      return
    case 'export': {
      const result = await api.triggerExport()
      session.state.message = `exported ${result.count} accepted items to ${result.out_path}`
      break
    }
  }
  render()
}

async function boot(): Promise<void> {
  taxonomy = await api.fetchTaxonomy()
  const legend = $('hotkeys')
  for (const [key, what] of HOTKEY_LEGEND) {
    const row = document.createElement('div')
    row.textContent = `${key}  ${what}`
    legend.append(row)
  }
  document.addEventListener('keydown', (event) => {
    const target = event.target as HTMLElement | null
    if (target && ['INPUT', 'TEXTAREA', 'SELECT'].includes(target.tagName)) return
    void handle(event.key)
  })
  $('export-button').onclick = () => void handle('e')
  await advance()
}

void boot()

import * as fs from 'fs'
import * as os from 'os'
import * as path from 'path'
import { describe, expect, it } from 'vitest'
import { extract } from '../src/extract'
import { decodeFeature } from '../src/mslf'
import { makeToyFolder } from './toy'

function tmpdir(): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), 'extractor-'))
}

describe('extract', () => {
  it('emits one feature file and one manifest row per (image, backbone)', async () => {
    const root = tmpdir()
    makeToyFolder(path.join(root, 'images'), 1) // 2 classes x 1 image
    const out = path.join(root, 'out')
    const result = await extract({
      imageRoot: path.join(root, 'images'),
      outDir: out,
      backbones: ['resnet18', 'squeezenet'],
    })
    expect(result.rows.length).toBe(4)
    expect(result.skipped).toEqual([])
    for (const row of result.rows) {
      expect(fs.existsSync(path.join(out, row.path))).toBe(true)
    }
    const manifest = fs.readFileSync(result.manifestPath, 'utf-8')
    expect(manifest.split('\n').length).toBe(6) // header + 4 rows + trailing LF
  }, 120_000)

  it('taps 1000-wide features and names samples by relative image path', async () => {
    const root = tmpdir()
    makeToyFolder(path.join(root, 'images'), 2)
    const out = path.join(root, 'out')
    const result = await extract({
      imageRoot: path.join(root, 'images'),
      outDir: out,
      backbones: ['googlenet'],
    })
    const ids = result.rows.map((r) => r.sampleId)
    expect(ids).toEqual(['blight/leaf_0.png', 'blight/leaf_1.png', 'healthy/leaf_0.png', 'healthy/leaf_1.png'])
    expect(result.rows.map((r) => r.label)).toEqual(['blight', 'blight', 'healthy', 'healthy'])
    for (const row of result.rows) {
      expect(row.path).toBe(`features/${row.sampleId}__googlenet.mslf`)
      const decoded = decodeFeature(fs.readFileSync(path.join(out, row.path)))
      expect(decoded.dims).toEqual([1000])
      expect(decoded.dtype).toBe('f32')
    }
    expect(fs.existsSync(path.join(out, 'preprocessing.json'))).toBe(true)
  }, 120_000)

  it('reproduces every output byte on a re-run', async () => {
    const root = tmpdir()
    makeToyFolder(path.join(root, 'images'), 2)
    const job = (out: string) => ({
      imageRoot: path.join(root, 'images'),
      outDir: out,
      backbones: ['alexnet'],
      batchSize: 3, // uneven split on 4 images; batching must not leak into values
    })
    const a = await extract(job(path.join(root, 'a')))
    const b = await extract(job(path.join(root, 'b')))
    expect(fs.readFileSync(a.manifestPath, 'utf-8')).toBe(fs.readFileSync(b.manifestPath, 'utf-8'))
    for (const row of a.rows) {
      const bytesA = fs.readFileSync(path.join(root, 'a', row.path))
      const bytesB = fs.readFileSync(path.join(root, 'b', row.path))
      expect(bytesA.equals(bytesB)).toBe(true)
    }
  }, 120_000)

  it('skips undecodable images with a warning and leaves them out of the manifest', async () => {
    const root = tmpdir()
    makeToyFolder(path.join(root, 'images'), 1)
    fs.writeFileSync(path.join(root, 'images', 'blight', 'broken.png'), Buffer.from('not an image'))
    const warnings: string[] = []
    const result = await extract({
      imageRoot: path.join(root, 'images'),
      outDir: path.join(root, 'out'),
      backbones: ['vgg16'],
      log: (m) => warnings.push(m),
    })
    expect(result.skipped).toEqual(['blight/broken.png'])
    expect(warnings.length).toBe(1)
    expect(warnings[0]).toContain('blight/broken.png')
    expect(result.rows.length).toBe(2)
    expect(fs.readFileSync(result.manifestPath, 'utf-8')).not.toContain('broken')
  }, 120_000)

  it('fails hard on undecodable images in strict mode', async () => {
    const root = tmpdir()
    makeToyFolder(path.join(root, 'images'), 1)
    fs.writeFileSync(path.join(root, 'images', 'healthy', 'broken.png'), Buffer.from([1, 2, 3]))
    await expect(
      extract({
        imageRoot: path.join(root, 'images'),
        outDir: path.join(root, 'out'),
        backbones: ['vgg16'],
        strict: true,
      }),
    ).rejects.toThrow('healthy/broken.png')
  }, 120_000)

  it('rejects unknown or repeated backbones and empty inputs', async () => {
    const root = tmpdir()
    makeToyFolder(path.join(root, 'images'), 1)
    const base = { imageRoot: path.join(root, 'images'), outDir: path.join(root, 'out') }
    await expect(extract({ ...base, backbones: ['resnet99'] })).rejects.toThrow("unknown backbone 'resnet99'")
    await expect(extract({ ...base, backbones: ['vgg16', 'vgg16'] })).rejects.toThrow('twice')
    await expect(extract({ ...base, backbones: [] })).rejects.toThrow('at least one backbone')
    await expect(extract({ ...base, backbones: ['vgg16'], batchSize: 0 })).rejects.toThrow('batch size')
    const empty = path.join(root, 'empty')
    fs.mkdirSync(empty)
    await expect(extract({ imageRoot: empty, outDir: path.join(root, 'out'), backbones: ['vgg16'] })).rejects.toThrow(
      'no class subfolders',
    )
  }, 120_000)
})

/**
 * Local backbone zoo.
 *
 * Each entry names a published CNN family and carries its documented input
 * geometry and the width of the tap point: the last fully-connected layer
 * before softmax, 1000 wide for all of these. The networks built here are
 * deterministic stand-ins with seeded weights, not the published weights:
 * they reproduce the input size and the FC output width so the emitted
 * files are shaped exactly like real extractions. Swap `buildBackbone` for
 * a graph-model loader to use actual pretrained weights; nothing else in
 * the pipeline changes.
 */

import * as tf from '@tensorflow/tfjs'

export const FEATURE_WIDTH = 1000

export interface BackboneSpec {
  /** Square input edge in pixels after resize + center crop. */
  input: number
}

export const BACKBONES: Record<string, BackboneSpec> = {
  alexnet: { input: 227 },
  darknet53: { input: 256 },
  densenet201: { input: 224 },
  efficientnetb0: { input: 224 },
  efficientnetb1: { input: 240 },
  efficientnetb2: { input: 260 },
  googlenet: { input: 224 },
  inceptionresnetv2: { input: 299 },
  inceptionv3: { input: 299 },
  mobilenetv2: { input: 224 },
  nasnetlarge: { input: 331 },
  resnet18: { input: 224 },
  resnet50: { input: 224 },
  resnet101: { input: 224 },
  shufflenet: { input: 224 },
  squeezenet: { input: 227 },
  vgg16: { input: 224 },
  vgg19: { input: 224 },
  xception: { input: 299 },
}

export interface Backbone {
  name: string
  input: number
  /** Maps a [n, input, input, 3] batch to [n, FEATURE_WIDTH] features. */
  run(batch: tf.Tensor4D): tf.Tensor2D
  dispose(): void
}

/** FNV-1a, so each backbone name owns a stable weight stream. */
function nameSeed(name: string): number {
  let h = 0x811c9dc5
  for (let i = 0; i < name.length; i++) {
    h ^= name.charCodeAt(i)
    h = Math.imul(h, 0x01000193)
  }
  return h >>> 0
}

export function buildBackbone(name: string): Backbone {
  const spec = BACKBONES[name]
  if (!spec) {
    throw new Error(`unknown backbone '${name}' (known: ${Object.keys(BACKBONES).sort().join(', ')})`)
  }
  const seed = nameSeed(name)
  const conv1 = tf.randomNormal([3, 3, 3, 8], 0, 0.15, 'float32', seed + 1)
  const conv2 = tf.randomNormal([3, 3, 8, 16], 0, 0.15, 'float32', seed + 2)
  const fcW = tf.randomNormal([16, FEATURE_WIDTH], 0, 0.3, 'float32', seed + 3)
  const fcB = tf.randomNormal([FEATURE_WIDTH], 0, 0.1, 'float32', seed + 4)
  return {
    name,
    input: spec.input,
    run(batch: tf.Tensor4D): tf.Tensor2D {
      return tf.tidy(() => {
        let x = tf.relu(tf.conv2d(batch, conv1 as tf.Tensor4D, 2, 'same'))
        x = tf.maxPool(x as tf.Tensor4D, 2, 2, 'same')
        x = tf.relu(tf.conv2d(x as tf.Tensor4D, conv2 as tf.Tensor4D, 2, 'same'))
        const pooled = tf.mean(x, [1, 2])
        return tf.add(tf.matMul(pooled as tf.Tensor2D, fcW as tf.Tensor2D), fcB) as tf.Tensor2D
      })
    },
    dispose() {
      conv1.dispose()
      conv2.dispose()
      fcW.dispose()
      fcB.dispose()
    },
  }
}

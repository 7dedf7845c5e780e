//! Convolution geometry of published CNN topologies, for efficiency-loss
//! analysis. Only the convolutions are listed; pooling and classifier layers
//! do not run filter kernels.

use alloc::vec::Vec;

use crate::decomp::ConvShape;

fn sq(fo: usize, fi: usize, out: usize, k: usize) -> ConvShape {
    ConvShape::square(fi, fo, out, k)
}

fn rect(fo: usize, fi: usize, out: usize, kh: usize, kw: usize) -> ConvShape {
    ConvShape {
        fi,
        fo,
        out_rows: out,
        out_cols: out,
        kh,
        kw,
    }
}

/// Original two-group AlexNet on a 227x227 input. Grouped layers list the
/// per-group input channels.
pub fn alexnet() -> Vec<ConvShape> {
    Vec::from([
        sq(96, 3, 55, 11),
        sq(256, 48, 27, 5),
        sq(384, 256, 13, 3),
        sq(384, 192, 13, 3),
        sq(256, 192, 13, 3),
    ])
}

/// ResNet-18 on 224x224, 1x1 projection shortcuts at each stage change.
pub fn resnet18() -> Vec<ConvShape> {
    let mut l = Vec::from([sq(64, 3, 112, 7)]);
    let mut cin = 64;
    for (c, size) in [(64, 56), (128, 28), (256, 14), (512, 7)] {
        l.push(sq(c, cin, size, 3));
        l.push(sq(c, c, size, 3));
        if cin != c {
            l.push(sq(c, cin, size, 1));
        }
        l.push(sq(c, c, size, 3));
        l.push(sq(c, c, size, 3));
        cin = c;
    }
    l
}

/// ResNet-50 (v1.5 geometry: bottleneck blocks, projection on the first
/// block of each stage, downsampling in the 3x3 conv so the first 1x1 of a
/// downsampling block runs at the previous resolution).
pub fn resnet50() -> Vec<ConvShape> {
    let mut l = Vec::from([sq(64, 3, 112, 7)]);
    let mut cin = 64;
    for (width, blocks, size) in [(64, 3, 56), (128, 4, 28), (256, 6, 14), (512, 3, 7)] {
        for b in 0..blocks {
            let reduce_at = if b == 0 && size != 56 { 2 * size } else { size };
            l.push(sq(width, cin, reduce_at, 1));
            l.push(sq(width, width, size, 3));
            l.push(sq(4 * width, width, size, 1));
            if b == 0 {
                l.push(sq(4 * width, cin, size, 1));
            }
            cin = 4 * width;
        }
    }
    l
}

/// Inception-v3 on 299x299, including the factorized 1x7/7x1 and 1x3/3x1 kernels.
pub fn inception_v3() -> Vec<ConvShape> {
    let mut l = Vec::from([
        sq(32, 3, 149, 3),
        sq(32, 32, 147, 3),
        sq(64, 32, 147, 3),
        sq(80, 64, 73, 1),
        sq(192, 80, 71, 3),
    ]);
    for (cin, pool_features) in [(192, 32), (256, 64), (288, 64)] {
        l.extend([
            sq(64, cin, 35, 1),
            sq(48, cin, 35, 1),
            sq(64, 48, 35, 5),
            sq(64, cin, 35, 1),
            sq(96, 64, 35, 3),
            sq(96, 96, 35, 3),
            sq(pool_features, cin, 35, 1),
        ]);
    }
    l.extend([
        sq(384, 288, 17, 3),
        sq(64, 288, 35, 1),
        sq(96, 64, 35, 3),
        sq(96, 96, 17, 3),
    ]);
    for c7 in [128, 160, 160, 192] {
        l.extend([
            sq(192, 768, 17, 1),
            sq(c7, 768, 17, 1),
            rect(c7, c7, 17, 1, 7),
            rect(192, c7, 17, 7, 1),
            sq(c7, 768, 17, 1),
            rect(c7, c7, 17, 7, 1),
            rect(c7, c7, 17, 1, 7),
            rect(c7, c7, 17, 7, 1),
            rect(192, c7, 17, 1, 7),
            sq(192, 768, 17, 1),
        ]);
    }
    l.extend([
        sq(192, 768, 17, 1),
        sq(320, 192, 8, 3),
        sq(192, 768, 17, 1),
        rect(192, 192, 17, 1, 7),
        rect(192, 192, 17, 7, 1),
        sq(192, 192, 8, 3),
    ]);
    for cin in [1280, 2048] {
        l.extend([
            sq(320, cin, 8, 1),
            sq(384, cin, 8, 1),
            rect(384, 384, 8, 1, 3),
            rect(384, 384, 8, 3, 1),
            sq(448, cin, 8, 1),
            sq(384, 448, 8, 3),
            rect(384, 384, 8, 1, 3),
            rect(384, 384, 8, 3, 1),
            sq(192, cin, 8, 1),
        ]);
    }
    l
}

/// Look up a topology by name (`alexnet`, `resnet18`, `resnet50`, `inception_v3`).
pub fn by_name(name: &str) -> Option<Vec<ConvShape>> {
    match name {
        "alexnet" => Some(alexnet()),
        "resnet18" | "resnet-18" => Some(resnet18()),
        "resnet50" | "resnet-50" => Some(resnet50()),
        "inception_v3" | "inception-v3" | "inceptionv3" => Some(inception_v3()),
        _ => None,
    }
}

pub const NAMES: [&str; 4] = ["alexnet", "resnet18", "resnet50", "inception_v3"];

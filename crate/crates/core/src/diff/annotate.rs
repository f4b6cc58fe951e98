use image::{Rgb, RgbImage};

use super::ComparisonReport;
use crate::raster::GrayImage;
use crate::segment::BBox;

pub const BLUE: Rgb<u8> = Rgb([0, 0, 255]);
pub const RED: Rgb<u8> = Rgb([255, 0, 0]);
pub const MAGENTA: Rgb<u8> = Rgb([255, 0, 255]);

const SEPARATOR: u32 = 8;
const SEPARATOR_COLOR: Rgb<u8> = Rgb([128, 128, 128]);
const THICKNESS: u32 = 2;

fn outline(canvas: &mut RgbImage, b: &BBox, x_off: u32, color: Rgb<u8>) {
    let (w, h) = canvas.dimensions();
    let x0 = x_off + b.x;
    let y0 = b.y;
    let x1 = x_off + b.right();
    let y1 = b.bottom();
    for y in y0..y1.min(h) {
        for x in x0..x1.min(w) {
            let edge = x < x0 + THICKNESS || x + THICKNESS >= x1 || y < y0 + THICKNESS || y + THICKNESS >= y1;
            if edge {
                canvas.put_pixel(x, y, color);
            }
        }
    }
}

/// Reference on the left, test on the right, separated by a grey band.
/// Coordinated words are outlined blue, word modifications red, inserted or
/// deleted lines magenta.
pub fn render_annotation(ref_img: &GrayImage, test_img: &GrayImage, report: &ComparisonReport) -> RgbImage {
    let width = ref_img.width() + SEPARATOR + test_img.width();
    let height = ref_img.height().max(test_img.height());
    let mut canvas = RgbImage::from_pixel(width, height, Rgb([255, 255, 255]));
    let test_x = ref_img.width() + SEPARATOR;
    for (img, x_off) in [(ref_img, 0), (test_img, test_x)] {
        for y in 0..img.height() {
            for x in 0..img.width() {
                let v = img.get(x, y);
                canvas.put_pixel(x + x_off, y, Rgb([v, v, v]));
            }
        }
    }
    for y in 0..height {
        for x in ref_img.width()..test_x {
            canvas.put_pixel(x, y, SEPARATOR_COLOR);
        }
    }

    for c in &report.coordinated {
        outline(&mut canvas, &c.ref_box, 0, BLUE);
        outline(&mut canvas, &c.test_box, test_x, BLUE);
    }
    for m in &report.modifications {
        let color = if m.kind.is_line() { MAGENTA } else { RED };
        if let Some(b) = &m.ref_box {
            outline(&mut canvas, b, 0, color);
        }
        if let Some(b) = &m.test_box {
            outline(&mut canvas, b, test_x, color);
        }
    }
    canvas
}

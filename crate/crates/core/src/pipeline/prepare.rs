use image::imageops::{self, FilterType};
use image::RgbImage;

use super::PipelineError;
use crate::geometry::Point2;
use crate::matcher::{AreaTransform, MatcherRequest};
use crate::sam::Area;
use crate::semantic::BBox;

/// Crops and resizes both areas to the square matcher input.
///
/// Each box is expanded symmetrically to a square on its longer side; where
/// that crosses an image border the window is shifted back inside, taking
/// the missing extent from the opposite side. A window longer than the
/// image dimension is truncated to it, in which case the two axes scale
/// differently.
pub fn prepare_area_pair(
    a0: &Area,
    a1: &Area,
    image0: &RgbImage,
    image1: &RgbImage,
    size: u32,
    max_matches: usize,
) -> Result<MatcherRequest, PipelineError> {
    let (crop0, transform0) = crop_square(&a0.bbox, image0, size)?;
    let (crop1, transform1) = crop_square(&a1.bbox, image1, size)?;
    Ok(MatcherRequest {
        image0: crop0,
        image1: crop1,
        transform0,
        transform1,
        max_matches,
    })
}

/// Both full images resized to the square matcher input.
pub fn full_image_request(image0: &RgbImage, image1: &RgbImage, size: u32, max_matches: usize) -> Result<MatcherRequest, PipelineError> {
    let whole = |img: &RgbImage| -> Result<(RgbImage, AreaTransform), PipelineError> {
        if img.width() == 0 || img.height() == 0 {
            return Err(PipelineError::DegenerateArea(BBox::new(0.0, 0.0, img.width() as f64, img.height() as f64)));
        }
        let t = AreaTransform::new(
            Point2::new(0.0, 0.0),
            size as f64 / img.width() as f64,
            size as f64 / img.height() as f64,
        )?;
        Ok((imageops::resize(img, size, size, FilterType::Triangle), t))
    };
    let (image0, transform0) = whole(image0)?;
    let (image1, transform1) = whole(image1)?;
    Ok(MatcherRequest {
        image0,
        image1,
        transform0,
        transform1,
        max_matches,
    })
}

/// Integer pixel window `[start, start + len)` on one axis.
fn window(lo: f64, hi: f64, side: u32, extent: u32) -> (u32, u32) {
    let len = side.min(extent);
    let center = 0.5 * (lo + hi);
    let start = (center - 0.5 * len as f64).round().clamp(0.0, (extent - len) as f64) as u32;
    (start, len)
}

fn crop_square(b: &BBox, img: &RgbImage, size: u32) -> Result<(RgbImage, AreaTransform), PipelineError> {
    let (w, h) = img.dimensions();
    let clamped = b.clamp_to(w as usize, h as usize);
    if !(clamped.width() > 0.0 && clamped.height() > 0.0) {
        return Err(PipelineError::DegenerateArea(*b));
    }
    let side = clamped.width().max(clamped.height()).ceil() as u32;
    let (x0, cw) = window(clamped.min_x, clamped.max_x, side, w);
    let (y0, ch) = window(clamped.min_y, clamped.max_y, side, h);
    let crop = imageops::crop_imm(img, x0, y0, cw, ch).to_image();
    let t = AreaTransform::new(
        Point2::new(x0 as f64, y0 as f64),
        size as f64 / cw as f64,
        size as f64 / ch as f64,
    )?;
    Ok((imageops::resize(&crop, size, size, FilterType::Triangle), t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sam::AreaKind;

    fn area(b: BBox) -> Area {
        Area::new(0, b, AreaKind::Soa, Some(1))
    }

    #[test]
    fn small_box_gets_square_crop() {
        let img = RgbImage::new(640, 480);
        let a = area(BBox::new(200.0, 100.0, 300.0, 200.0));
        let r = prepare_area_pair(&a, &a, &img, &img, 256, 100).unwrap();
        assert_eq!(r.transform0.scale_x, r.transform0.scale_y);
        let reg = r.region0();
        assert!(reg.width() >= 100.0 && (reg.width() - reg.height()).abs() < 1e-9);
        assert!(reg.contains(&Point2::new(200.0, 100.0)));
        assert_eq!(r.image0.dimensions(), (256, 256));
    }

    #[test]
    fn wide_box_expands_to_square() {
        let img = RgbImage::new(640, 480);
        let a = area(BBox::new(100.0, 200.0, 400.0, 300.0));
        let r = prepare_area_pair(&a, &a, &img, &img, 256, 100).unwrap();
        assert!((r.transform0.scale_x - 256.0 / 300.0).abs() < 1e-12);
        assert!((r.transform0.scale_y - 256.0 / 300.0).abs() < 1e-12);
        assert_eq!(r.transform0.offset, Point2::new(100.0, 100.0));
    }

    #[test]
    fn border_box_expands_inward() {
        let img = RgbImage::new(640, 480);
        let a = area(BBox::new(0.0, 200.0, 50.0, 350.0));
        let r = prepare_area_pair(&a, &a, &img, &img, 256, 100).unwrap();
        let reg = r.region0();
        assert_eq!(reg.min_x, 0.0);
        assert!((reg.max_x - 150.0).abs() < 1e-9);
        let p = Point2::new(12.3, 301.7);
        let back = r.transform0.to_original(&r.transform0.to_crop(&p));
        assert!(back.distance(&p) < 0.5);
    }

    #[test]
    fn degenerate_box_is_rejected() {
        let img = RgbImage::new(64, 48);
        let a = area(BBox::new(10.0, 10.0, 10.0, 30.0));
        assert!(matches!(
            prepare_area_pair(&a, &a, &img, &img, 32, 10),
            Err(PipelineError::DegenerateArea(_))
        ));
    }

    #[test]
    fn full_request_scales_each_axis() {
        let img = RgbImage::new(640, 480);
        let r = full_image_request(&img, &img, 256, 10).unwrap();
        assert_eq!(r.region0(), BBox::new(0.0, 0.0, 640.0, 480.0));
    }
}

use super::{BackendError, VideoSegmentRequest, VideoSegmentResponse, VideoSegmenter};
use crate::bitmap::Bitmap;
use crate::prompt::Prompt2D;
use crate::scalar::Scalar;
use crate::voxel::Frame;

/// Deterministic propagator: color-similarity flood fill on frame 0,
/// carried frame to frame through overlapping pixels.
///
/// A pixel is admissible when it is occupied and its color lies within
/// `color_tolerance` (Euclidean RGB) of the reference color. Frame 0 is a
/// 4-connected fill from the prompt seeds; frame `t` is a 4-connected fill
/// from the admissible pixels that frame `t-1` selected. An empty frame
/// ends the sweep.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReferencePropagator;

impl<S: Scalar> VideoSegmenter<S> for ReferencePropagator {
    fn segment_video(&self, request: &VideoSegmentRequest<S>) -> Result<VideoSegmentResponse, BackendError> {
        request.validate()?;
        let frames = &request.frames.frames;
        let first = &frames[0];
        let (seeds, reference) = frame_zero_seeds(first, &request.prompt, request.params.seed_search_radius)?;

        let tol = request.params.color_tolerance;
        let admissible = |frame: &Frame<S>, px: usize| {
            frame.occupancy[px] && color_distance_sq(frame.colors[px], reference) <= tol * tol
        };

        let mut masks = Vec::with_capacity(frames.len());
        let mut previous: Option<Bitmap> = None;
        for frame in frames {
            let seeds: Vec<usize> = match &previous {
                None => seeds.clone(),
                Some(prev) => prev
                    .bits
                    .iter()
                    .enumerate()
                    .filter_map(|(px, &set)| set.then_some(px))
                    .collect(),
            };
            let mask = if previous.as_ref().is_some_and(Bitmap::is_clear) {
                Bitmap::empty(frame.width, frame.height)
            } else {
                flood_fill(frame, &seeds, |px| admissible(frame, px))
            };
            masks.push(mask.clone());
            previous = Some(mask);
        }
        Ok(VideoSegmentResponse { masks })
    }
}

/// Seed pixels of frame 0 and the reference color they define.
fn frame_zero_seeds<S: Scalar>(
    frame: &Frame<S>,
    prompt: &Prompt2D,
    radius: usize,
) -> Result<(Vec<usize>, [S; 3]), BackendError> {
    let seeds: Vec<usize> = match prompt {
        Prompt2D::Point { u, v } => {
            let (u, v) = nearest_occupied(frame, *u, *v, radius).ok_or_else(|| {
                BackendError::InvalidPrompt(format!(
                    "no occupied pixel within {radius} of ({u}, {v})"
                ))
            })?;
            let px = frame.pixel(u, v);
            return Ok((vec![px], frame.colors[px]));
        }
        Prompt2D::Rect {
            u_min,
            v_min,
            u_max,
            v_max,
        } => (*v_min..=*v_max)
            .flat_map(|v| (*u_min..=*u_max).map(move |u| (u, v)))
            .map(|(u, v)| frame.pixel(u, v))
            .filter(|&px| frame.occupancy[px])
            .collect(),
        Prompt2D::Mask(mask) => mask
            .bits
            .iter()
            .enumerate()
            .filter_map(|(px, &set)| (set && frame.occupancy[px]).then_some(px))
            .collect(),
    };
    if seeds.is_empty() {
        return Err(BackendError::InvalidPrompt(
            "prompt covers no occupied pixel".into(),
        ));
    }
    let mut sum = [S::zero(); 3];
    for &px in &seeds {
        for c in 0..3 {
            sum[c] = sum[c] + frame.colors[px][c];
        }
    }
    let n = S::from_usize_lossy(seeds.len());
    Ok((seeds, sum.map(|s| s / n)))
}

/// Closest occupied pixel by Chebyshev distance; ties resolved by the
/// smallest `(v, u)`.
fn nearest_occupied<S: Scalar>(frame: &Frame<S>, u: usize, v: usize, radius: usize) -> Option<(usize, usize)> {
    if frame.is_occupied(u, v) {
        return Some((u, v));
    }
    for d in 1..=radius {
        let v_lo = v.saturating_sub(d);
        let v_hi = (v + d).min(frame.height - 1);
        let u_lo = u.saturating_sub(d);
        let u_hi = (u + d).min(frame.width - 1);
        for vv in v_lo..=v_hi {
            for uu in u_lo..=u_hi {
                if uu.abs_diff(u).max(vv.abs_diff(v)) == d && frame.is_occupied(uu, vv) {
                    return Some((uu, vv));
                }
            }
        }
    }
    None
}

fn flood_fill<S: Scalar>(frame: &Frame<S>, seeds: &[usize], admissible: impl Fn(usize) -> bool) -> Bitmap {
    let (w, h) = (frame.width, frame.height);
    let mut mask = Bitmap::empty(w, h);
    let mut stack: Vec<usize> = Vec::new();
    for &px in seeds {
        if !mask.bits[px] && admissible(px) {
            mask.bits[px] = true;
            stack.push(px);
        }
    }
    while let Some(px) = stack.pop() {
        let (u, v) = (px % w, px / w);
        let neighbors = [
            (u > 0).then(|| px - 1),
            (u + 1 < w).then(|| px + 1),
            (v > 0).then(|| px - w),
            (v + 1 < h).then(|| px + w),
        ];
        for n in neighbors.into_iter().flatten() {
            if !mask.bits[n] && admissible(n) {
                mask.bits[n] = true;
                stack.push(n);
            }
        }
    }
    mask
}

fn color_distance_sq<S: Scalar>(a: [S; 3], b: [S; 3]) -> S {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::PropagationParams;
    use crate::video::{DirectionalView, FrameSequence, Sign};
    use crate::voxel::Axis;

    const RED: [f64; 3] = [1.0, 0.0, 0.0];
    const GREEN: [f64; 3] = [0.0, 1.0, 0.0];

    fn frame(w: usize, h: usize, cells: &[((usize, usize), [f64; 3])]) -> Frame<f64> {
        let mut f = Frame::blank(w, h);
        for &((u, v), c) in cells {
            let px = f.pixel(u, v);
            f.occupancy[px] = true;
            f.colors[px] = c;
        }
        f
    }

    fn request(frames: Vec<Frame<f64>>, prompt: Prompt2D) -> VideoSegmentRequest<f64> {
        let (w, h) = (frames[0].width, frames[0].height);
        VideoSegmentRequest {
            frames: FrameSequence {
                view: DirectionalView {
                    axis: Axis::Z,
                    sign: Sign::Plus,
                    anchor_slice: 0,
                    extent: frames.len(),
                    frame_dims: (w, h),
                },
                frames,
            },
            prompt,
            params: PropagationParams::default(),
        }
    }

    fn square(u0: usize, v0: usize, c: [f64; 3]) -> Vec<((usize, usize), [f64; 3])> {
        vec![((u0, v0), c), ((u0 + 1, v0), c), ((u0, v0 + 1), c), ((u0 + 1, v0 + 1), c)]
    }

    #[test]
    fn single_region_is_selected() {
        let f = frame(4, 4, &square(1, 1, RED));
        let resp = ReferencePropagator
            .segment_video(&request(vec![f], Prompt2D::Point { u: 1, v: 2 }))
            .unwrap();
        assert_eq!(resp.masks.len(), 1);
        assert_eq!(resp.masks[0].iter_set().collect::<Vec<_>>(), vec![(1, 1), (2, 1), (1, 2), (2, 2)]);
    }

    #[test]
    fn disjoint_region_is_not_reached() {
        let mut cells = square(0, 0, RED);
        cells.extend(square(3, 3, RED));
        let f = frame(6, 6, &cells);
        let resp = ReferencePropagator
            .segment_video(&request(vec![f], Prompt2D::Point { u: 4, v: 4 }))
            .unwrap();
        assert_eq!(resp.masks[0].count(), 4);
        assert!(resp.masks[0].get(3, 3));
        assert!(!resp.masks[0].get(0, 0));
    }

    #[test]
    fn diagonal_neighbors_are_not_connected() {
        let f = frame(3, 3, &[((0, 0), RED), ((1, 1), RED)]);
        let resp = ReferencePropagator
            .segment_video(&request(vec![f], Prompt2D::Point { u: 0, v: 0 }))
            .unwrap();
        assert_eq!(resp.masks[0].count(), 1);
    }

    #[test]
    fn color_boundary_stops_the_fill() {
        let f = frame(3, 1, &[((0, 0), RED), ((1, 0), GREEN), ((2, 0), RED)]);
        let resp = ReferencePropagator
            .segment_video(&request(vec![f], Prompt2D::Point { u: 0, v: 0 }))
            .unwrap();
        assert_eq!(resp.masks[0].count(), 1);
    }

    #[test]
    fn empty_point_searches_within_radius() {
        let f = frame(7, 7, &[((5, 3), RED), ((1, 5), RED)]);
        // (3,3): (5,3) and (1,5) are both at Chebyshev distance 2; (5,3) has smaller v.
        let resp = ReferencePropagator
            .segment_video(&request(vec![f.clone()], Prompt2D::Point { u: 3, v: 3 }))
            .unwrap();
        assert_eq!(resp.masks[0].iter_set().collect::<Vec<_>>(), vec![(5, 3)]);

        let mut far = request(vec![f], Prompt2D::Point { u: 3, v: 0 });
        far.params.seed_search_radius = 1;
        assert!(matches!(
            ReferencePropagator.segment_video(&far),
            Err(BackendError::InvalidPrompt(_))
        ));
    }

    #[test]
    fn rect_without_occupied_pixels_is_invalid() {
        let f = frame(4, 4, &square(2, 2, RED));
        let prompt = Prompt2D::Rect { u_min: 0, v_min: 0, u_max: 1, v_max: 1 };
        assert!(matches!(
            ReferencePropagator.segment_video(&request(vec![f], prompt)),
            Err(BackendError::InvalidPrompt(_))
        ));
    }

    #[test]
    fn sweep_stops_after_first_empty_frame() {
        let a = frame(3, 3, &square(0, 0, RED));
        let gap = frame(3, 3, &[]);
        let b = frame(3, 3, &square(0, 0, RED));
        let resp = ReferencePropagator
            .segment_video(&request(vec![a, gap, b], Prompt2D::Point { u: 0, v: 0 }))
            .unwrap();
        let counts: Vec<usize> = resp.masks.iter().map(Bitmap::count).collect();
        assert_eq!(counts, vec![4, 0, 0]);
    }

    #[test]
    fn propagation_follows_overlap_and_grows_within_frame() {
        let a = frame(5, 1, &[((0, 0), RED)]);
        let b = frame(5, 1, &[((0, 0), RED), ((1, 0), RED), ((2, 0), RED), ((4, 0), RED)]);
        let resp = ReferencePropagator
            .segment_video(&request(vec![a, b], Prompt2D::Point { u: 0, v: 0 }))
            .unwrap();
        assert_eq!(resp.masks[1].iter_set().map(|p| p.0).collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn out_of_range_tolerance_is_rejected() {
        let mut req = request(vec![frame(2, 2, &square(0, 0, RED))], Prompt2D::Point { u: 0, v: 0 });
        req.params.color_tolerance = 1.5;
        assert!(matches!(
            ReferencePropagator.segment_video(&req),
            Err(BackendError::InvalidRequest(_))
        ));
    }
}

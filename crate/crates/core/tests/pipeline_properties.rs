use ddsb_core::discriminator::{cumulative_curve, find_phase_pair, pair_objective};
use ddsb_core::eval::size_based_detect;
use ddsb_core::phantom::{generate, suite, PhantomSpec};
use ddsb_core::pipeline::{detect_from_masks, discriminate, filter_masks, segment_frames};
use ddsb_core::{detect_phases, Config, GrayFrame};

/// Gap between the best and second-best |objective| over all pairs.
fn max_margin(a: &[f64]) -> f64 {
    let t = a.len();
    let mut vals: Vec<f64> = Vec::new();
    for i in 0..t {
        for j in i + 1..t {
            vals.push(pair_objective(a[i], a[j], a[t - 1]).abs());
        }
    }
    vals.sort_by(|x, y| y.total_cmp(x));
    vals[0] - vals[1]
}

#[test]
fn phantom_suite_recovers_ground_truth() {
    let cfg = Config::default();
    for spec in suite(8, 11) {
        let seq = generate(&spec).unwrap();
        let det = detect_phases(&seq.frames, &cfg).unwrap();
        assert!(!det.phase.degenerate);
        assert!(det.phase.t_ed.abs_diff(spec.ed_frame) <= 1, "{spec:?} -> {:?}", det.phase);
        assert!(det.phase.t_es.abs_diff(spec.es_frame) <= 1, "{spec:?} -> {:?}", det.phase);
    }
}

#[test]
fn shrink_then_grow_phantom() {
    // Shrinks from frame 1 to 10, grows back to 20.
    let spec = PhantomSpec { frame_count: 20, ed_frame: 1, es_frame: 10, ..PhantomSpec::default() };
    let seq = generate(&spec).unwrap();
    let det = detect_phases(&seq.frames, &Config::default()).unwrap();
    assert!(det.phase.t_es.abs_diff(10) <= 1);
    assert!(det.phase.t_ed <= 2 || det.phase.t_ed >= 19, "{:?}", det.phase);
}

#[test]
fn reversing_frames_mirrors_the_pair() {
    let cfg = Config::default();
    let mut checked = 0;
    for spec in suite(6, 3) {
        let seq = generate(&spec).unwrap();
        let t = seq.frames.len();
        let fwd = detect_phases(&seq.frames, &cfg).unwrap();
        if fwd.phase.degenerate || max_margin(&fwd.curve.cumulative) < 1e-6 {
            continue;
        }
        let mut rev_frames = seq.frames.clone();
        rev_frames.reverse();
        let rev = detect_phases(&rev_frames, &cfg).unwrap();
        assert_eq!(rev.anchors.anchors, fwd.anchors.anchors);
        assert_eq!(rev.phase.t_ed, t + 1 - fwd.phase.t_ed);
        assert_eq!(rev.phase.t_es, t + 1 - fwd.phase.t_es);
        assert!((rev.phase.objective + fwd.phase.objective).abs() < 1e-9);
        checked += 1;
    }
    assert!(checked >= 4);
}

#[test]
fn appending_a_copy_of_the_last_frame_keeps_interior_pair() {
    let cfg = Config::default();
    let mut checked = 0;
    for spec in suite(6, 5) {
        let seq = generate(&spec).unwrap();
        let masks = filter_masks(&segment_frames(&seq.frames, &cfg).unwrap(), &cfg);
        let det = detect_from_masks(&masks, &cfg).unwrap();
        let t = masks.len();
        if det.phase.j0 == t || max_margin(&det.curve.cumulative) < 1e-6 {
            continue;
        }
        let mut longer = masks.clone();
        longer.push(masks[t - 1].clone());
        let (_, phase) = discriminate(&longer, &det.anchors, &cfg).unwrap();
        assert_eq!((phase.i0, phase.j0), (det.phase.i0, det.phase.j0));
        checked += 1;
    }
    assert!(checked >= 4);
}

#[test]
fn equal_masks_give_equal_curves_under_intensity_scaling() {
    let cfg = Config::default();
    let spec = suite(1, 9).remove(0);
    let seq = generate(&spec).unwrap();
    let scaled: Vec<GrayFrame> = seq
        .frames
        .iter()
        .map(|f| {
            let px = f.pixels().iter().map(|&v| (v as f64 * 1.25).round().min(255.0) as u8).collect();
            GrayFrame::new(f.height(), f.width(), px).unwrap()
        })
        .collect();
    let a = segment_frames(&seq.frames, &cfg).unwrap();
    let b = segment_frames(&scaled, &cfg).unwrap();
    assert_eq!(a, b, "scaling changed the masks; pick another factor");
    let da = detect_phases(&seq.frames, &cfg).unwrap();
    let db = detect_phases(&scaled, &cfg).unwrap();
    assert_eq!(da.curve, db.curve);
    assert_eq!(da.phase, db.phase);
}

#[test]
fn size_baseline_is_exact_on_noiseless_phantoms() {
    let cfg = Config::default();
    for spec in suite(6, 21) {
        let seq = generate(&spec).unwrap();
        let masks = filter_masks(&segment_frames(&seq.frames, &cfg).unwrap(), &cfg);
        let det = detect_from_masks(&masks, &cfg).unwrap();
        let base = size_based_detect(&masks, &det.anchors).unwrap();
        assert_eq!((base.t_ed, base.t_es), (spec.ed_frame, spec.es_frame));
    }
}

#[test]
fn curve_of_identical_frames_is_flat() {
    let spec = PhantomSpec { depth: 0.0, frame_count: 6, ed_frame: 1, es_frame: 2, ..PhantomSpec::default() };
    let seq = generate(&spec).unwrap();
    let det = detect_phases(&seq.frames, &Config::default()).unwrap();
    assert!(det.curve.rates.iter().all(|&e| e == 0.0));
    assert!(det.phase.degenerate);
    assert_eq!((det.phase.t_ed, det.phase.t_es), (1, 2));
    let flat = cumulative_curve(&[0.0; 5]).unwrap();
    assert_eq!(find_phase_pair(&flat).unwrap(), det.phase);
}

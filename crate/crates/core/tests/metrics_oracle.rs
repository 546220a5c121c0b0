#![allow(clippy::needless_range_loop)]

use efl_core::metrics::{accuracy, binary_f1, macro_f1, pearson, Prediction};
use efl_core::Rng;

// Reference implementations: deliberately naive, sharing no code with the
// library.

fn ref_accuracy(p: &[usize], g: &[usize]) -> f64 {
    let mut hits = 0.0;
    for i in 0..p.len() {
        if p[i] == g[i] {
            hits += 1.0;
        }
    }
    hits / p.len() as f64
}

fn ref_f1(p: &[usize], g: &[usize], class: usize) -> f64 {
    let predicted = p.iter().filter(|&&x| x == class).count() as f64;
    let actual = g.iter().filter(|&&x| x == class).count() as f64;
    let mut tp = 0.0;
    for i in 0..p.len() {
        for j in 0..g.len() {
            if i == j && p[i] == class && g[j] == class {
                tp += 1.0;
            }
        }
    }
    if tp == 0.0 {
        return 0.0;
    }
    let precision = tp / predicted;
    let recall = tp / actual;
    2.0 * precision * recall / (precision + recall)
}

fn ref_macro(p: &[usize], g: &[usize], n: usize) -> f64 {
    (0..n).map(|c| ref_f1(p, g, c)).sum::<f64>() / n as f64
}

/// Pairwise-difference form of the correlation coefficient.
fn ref_pearson(x: &[f64], y: &[f64]) -> f64 {
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..x.len() {
        for j in 0..x.len() {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            sxy += dx * dy;
            sxx += dx * dx;
            syy += dy * dy;
        }
    }
    sxy / (sxx * syy).sqrt()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

#[test]
fn two_hundred_random_sets_match_the_reference() {
    let mut rng = Rng::new(20210429);
    for set in 0..200 {
        let n = 1 + rng.below(200);
        let classes = 2 + rng.below(4);
        let p: Vec<usize> = (0..n).map(|_| rng.below(classes)).collect();
        let g: Vec<usize> = (0..n).map(|_| rng.below(classes)).collect();
        let preds: Vec<Prediction> = (0..n).map(|i| Prediction::class(i.to_string(), p[i], g[i])).collect();
        assert!(close(accuracy(&preds).unwrap(), ref_accuracy(&p, &g)), "accuracy, set {set}");
        assert!(close(binary_f1(&preds, 1).unwrap(), ref_f1(&p, &g, 1)), "binary f1, set {set}");
        assert!(close(macro_f1(&preds, classes).unwrap(), ref_macro(&p, &g, classes)), "macro f1, set {set}");

        let m = 2 + rng.below(199);
        let x: Vec<f64> = (0..m).map(|_| rng.next_f64() * 5.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.5 * v + rng.next_f64() * 3.0).collect();
        let scored: Vec<Prediction> = (0..m).map(|i| Prediction::score(i.to_string(), x[i], y[i])).collect();
        assert!(close(pearson(&scored).unwrap(), ref_pearson(&x, &y)), "pearson, set {set}");
    }
}

#[test]
fn accuracy_is_order_invariant_and_pearson_affine_invariant() {
    let mut rng = Rng::new(5);
    let mut preds: Vec<Prediction> = (0..50)
        .map(|i| Prediction::class(i.to_string(), rng.below(3), rng.below(3)))
        .collect();
    let before = accuracy(&preds).unwrap();
    rng.shuffle(&mut preds);
    assert_eq!(accuracy(&preds).unwrap(), before);

    let pts: Vec<(f64, f64)> = (0..40).map(|_| (rng.next_f64(), rng.next_f64())).collect();
    let base: Vec<Prediction> = pts.iter().map(|&(x, y)| Prediction::score("u", x, y)).collect();
    let moved: Vec<Prediction> = pts.iter().map(|&(x, y)| Prediction::score("u", 3.0 * x - 7.0, 0.25 * y + 1.0)).collect();
    assert!((pearson(&base).unwrap() - pearson(&moved).unwrap()).abs() < 1e-12);
}

#[test]
fn two_class_macro_f1_is_the_mean_of_both_binary_f1s() {
    let mut rng = Rng::new(9);
    let preds: Vec<Prediction> = (0..80)
        .map(|i| Prediction::class(i.to_string(), rng.below(2), rng.below(2)))
        .collect();
    let avg = (binary_f1(&preds, 0).unwrap() + binary_f1(&preds, 1).unwrap()) / 2.0;
    let m = macro_f1(&preds, 2).unwrap();
    assert!((m - avg).abs() < 1e-15);
    assert!((0.0..=1.0).contains(&m));
}

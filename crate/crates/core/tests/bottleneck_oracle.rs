//! Bottleneck distance against exhaustive matching, plus metric axioms.

mod oracles;

use dmapper::bottleneck::{bottleneck, bottleneck_points};
use dmapper::persistence::{DiagramPoint, ExtendedDiagram, PointClass};
use dmapper::seeding::rng_from_seed;
use oracles::{bottleneck_diagrams_exhaustive, bottleneck_exhaustive};
use rand::Rng;

fn random_diagram<R: Rng>(rng: &mut R, max_per_class: usize) -> ExtendedDiagram {
    let coarse = rng.gen_bool(0.3);
    let draw = |rng: &mut R| {
        if coarse {
            rng.gen_range(0..6) as f64 * 0.5
        } else {
            rng.gen_range(-3.0..3.0)
        }
    };
    let mut points = Vec::new();
    for class in PointClass::ALL {
        for _ in 0..rng.gen_range(0..=max_per_class) {
            let (birth, death) = (draw(rng), draw(rng));
            points.push(DiagramPoint { class, birth, death });
        }
    }
    ExtendedDiagram::new(points)
}

#[test]
fn equals_exhaustive_matching() {
    let mut rng = rng_from_seed(5);
    for _ in 0..200 {
        let a = random_diagram(&mut rng, 6);
        let b = random_diagram(&mut rng, 6);
        let got = bottleneck(&a, &b);
        let want = bottleneck_diagrams_exhaustive(&a, &b);
        assert!((got - want).abs() <= 1e-12, "{got} vs {want}\n{a:?}\n{b:?}");
    }
}

#[test]
fn small_hand_cases() {
    assert_eq!(bottleneck_points(&[], &[]), 0.0);
    assert_eq!(bottleneck_points(&[(0.0, 4.0)], &[]), 2.0);
    assert_eq!(bottleneck_points(&[(0.0, 4.0)], &[(0.5, 4.5)]), 0.5);
    // Cheaper to send both to the diagonal than to match across.
    assert_eq!(bottleneck_points(&[(0.0, 0.5)], &[(5.0, 5.25)]), 0.25);
    assert_eq!(bottleneck_exhaustive(&[(0.0, 0.5)], &[(5.0, 5.25)]), 0.25);
}

#[test]
fn metric_axioms() {
    let mut rng = rng_from_seed(6);
    for _ in 0..100 {
        let a = random_diagram(&mut rng, 5);
        let b = random_diagram(&mut rng, 5);
        let c = random_diagram(&mut rng, 5);
        assert_eq!(bottleneck(&a, &a), 0.0);
        assert_eq!(bottleneck(&a, &b), bottleneck(&b, &a));
        assert!(bottleneck(&a, &b) >= 0.0);
        assert!(bottleneck(&a, &c) <= bottleneck(&a, &b) + bottleneck(&b, &c) + 1e-12);
    }
}

#[test]
fn classes_are_never_matched_across() {
    let a = ExtendedDiagram::new(vec![DiagramPoint { class: PointClass::Ord0, birth: 0.0, death: 2.0 }]);
    let b = ExtendedDiagram::new(vec![DiagramPoint { class: PointClass::Rel1, birth: 0.0, death: 2.0 }]);
    assert_eq!(bottleneck(&a, &b), 1.0);
}

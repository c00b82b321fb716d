use emogait::classify::{LabeledDescriptor, Metric};
use emogait::evaluate::{ClassifierConfig, CrossvalOptions, Mode, PreparedDataset};
use emogait::motion::DescriptorConfig;
use emogait::synth::{generate_dataset, GaitParams, TORSO_JOINTS};
use rayon::prelude::*;

fn small(seed: u64) -> GaitParams {
    GaitParams {
        duration: 2.0,
        n_joints: 19,
        ..GaitParams::default().with_seed(seed)
    }
}

fn describe(params: &GaitParams, subjects: usize, reps: usize) -> Vec<LabeledDescriptor> {
    let config = DescriptorConfig::new(TORSO_JOINTS.to_vec());
    generate_dataset(params, subjects, reps)
        .unwrap()
        .par_iter()
        .map(|s| LabeledDescriptor {
            descriptor: config.describe(s).unwrap(),
            label: s.label().unwrap().clone(),
            subject_id: s.subject_id().to_string(),
        })
        .collect()
}

fn accuracy(params: &GaitParams, config: &ClassifierConfig) -> f64 {
    let data = describe(params, 6, 2);
    PreparedDataset::new(&data, true)
        .unwrap()
        .crossval(&params.label_set(), config, CrossvalOptions::default())
        .unwrap()
        .average_accuracy
}

#[test]
fn accuracy_degrades_monotonically_with_noise() {
    let config = ClassifierConfig::default();
    let accs: Vec<f64> = [0.0, 0.01, 0.05, 0.2]
        .iter()
        .map(|&s| accuracy(&small(11).with_noise(s), &config))
        .collect();
    assert!(accs.windows(2).all(|w| w[0] >= w[1]), "{accs:?}");
    assert!(accs[0] > accs[3], "{accs:?}");
}

#[test]
fn identical_subjects_without_noise_are_perfectly_separated() {
    let params = GaitParams {
        subject_variability: 0.0,
        ..small(4).with_noise(0.0)
    };
    for config in [
        ClassifierConfig::default(),
        ClassifierConfig { mode: Mode::Knn, metric: Metric::Lerm, k: 1 },
    ] {
        assert_eq!(accuracy(&params, &config), 1.0, "{config:?}");
    }
}

#[test]
fn generation_is_reproducible() {
    let a = generate_dataset(&small(9), 2, 1).unwrap();
    let b = generate_dataset(&small(9), 2, 1).unwrap();
    assert_eq!(a, b);
    let c = generate_dataset(&small(10), 2, 1).unwrap();
    assert_ne!(a, c);
}

// Scratch harness used to generate and calibrate the recidivism-style
// fixture; not part of the API.

use std::time::{Duration, Instant};

use forestleak::data_model::{
    sample_training_set, Attribute, AttributeKind, AttributeSchema, Dataset, Value,
};
use forestleak::eval::{random_baseline, reconstruction_error};
use forestleak::recon::{attack, ReconProblem};
use forestleak::trainer::{train_forest, MaxFeatures, TrainParams};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn schema() -> AttributeSchema {
    let b = |name: &str| Attribute { name: name.into(), kind: AttributeKind::Binary };
    let g = |name: &str, gid: usize| Attribute {
        name: name.into(),
        kind: AttributeKind::OneHotMember { group_id: gid },
    };
    AttributeSchema::new(
        vec![
            b("sex_male"),
            b("juv_offenses"),
            b("charge_felony"),
            g("age_lt_25", 0),
            g("age_25_45", 0),
            g("age_gt_45", 0),
            g("priors_none", 1),
            g("priors_1_3", 1),
            g("priors_gt_3", 1),
            g("stay_lt_week", 2),
            g("stay_week_month", 2),
            g("stay_gt_month", 2),
            g("supervision_low", 3),
            g("supervision_med", 3),
            g("supervision_high", 3),
        ],
        vec![vec![3, 4, 5], vec![6, 7, 8], vec![9, 10, 11], vec![12, 13, 14]],
        2,
    )
    .unwrap()
}

fn pick(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let draw: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if draw < acc {
            return i;
        }
    }
    probs.len() - 1
}

fn generate(n: usize, seed: u64) -> Dataset {
    let schema = schema();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let risk = pick(&mut rng, &[0.45, 0.35, 0.20]);
        let mut row = vec![Value::Int(0); 15];
        let b = |rng: &mut ChaCha8Rng, p: f64| Value::Int(i64::from(rng.random::<f64>() < p));
        row[0] = b(&mut rng, [0.70, 0.80, 0.85][risk]);
        row[1] = b(&mut rng, [0.05, 0.20, 0.45][risk]);
        row[2] = b(&mut rng, [0.30, 0.45, 0.65][risk]);
        let age = pick(&mut rng, &[[0.15, 0.45, 0.40], [0.30, 0.50, 0.20], [0.55, 0.35, 0.10]][risk].as_slice());
        row[3 + age] = Value::Int(1);
        let priors = pick(&mut rng, &[[0.60, 0.30, 0.10], [0.25, 0.50, 0.25], [0.10, 0.35, 0.55]][risk].as_slice());
        row[6 + priors] = Value::Int(1);
        let stay = pick(&mut rng, &[[0.60, 0.30, 0.10], [0.40, 0.40, 0.20], [0.25, 0.40, 0.35]][risk].as_slice());
        row[9 + stay] = Value::Int(1);
        let sup = pick(&mut rng, &[[0.70, 0.25, 0.05], [0.30, 0.50, 0.20], [0.10, 0.40, 0.50]][risk].as_slice());
        row[12 + sup] = Value::Int(1);
        let p_recid = [0.15, 0.50, 0.85][risk];
        labels.push(usize::from(rng.random::<f64>() < p_recid));
        rows.push(row);
    }
    Dataset::new(schema, rows, labels, "two_year_recid").unwrap()
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mode = args.get(1).map(String::as_str).unwrap_or("eval");
    let corpus = generate(400, 42);

    if mode == "write" {
        corpus.save("crates/forestleak/fixtures/recidivism.csv").unwrap();
        corpus.schema.save("crates/forestleak/fixtures/recidivism.schema.json").unwrap();
        println!("fixture written: {} rows", corpus.n_rows());
        return;
    }

    // Train accuracy at N = 100, deep forest, no bagging.
    for seed in [1u64, 2, 3] {
        let (train, _) = sample_training_set(&corpus, 100, seed).unwrap();
        let forest = train_forest(
            &train,
            &TrainParams { n_trees: 100, seed, ..Default::default() },
        )
        .unwrap();
        println!("seed {seed}: train acc @100 = {:.3}", forest.accuracy(&train));
    }

    // Exact recovery: N = 25, 20 trees, deep, no bagging, 5 seeds.
    for seed in [1u64, 2, 3, 4, 5] {
        let (train, _) = sample_training_set(&corpus, 25, seed).unwrap();
        let forest = train_forest(
            &train,
            &TrainParams { n_trees: 20, seed, ..Default::default() },
        )
        .unwrap();
        let mut problem = ReconProblem::new(forest);
        problem.time_limit = Some(Duration::from_secs(60));
        problem.seed = seed;
        let t0 = Instant::now();
        let outcome = attack(&problem).unwrap();
        let status = outcome.result.status;
        let error = outcome
            .dataset
            .as_ref()
            .map(|ds| reconstruction_error(&train, ds, None).unwrap().error);
        println!(
            "no-bag seed {seed}: {status:?} error {error:?} in {} ms",
            t0.elapsed().as_millis()
        );
    }

    if mode == "bagged" {
        for seed in [1u64, 2, 3, 4, 5] {
            let (train, _) = sample_training_set(&corpus, 25, seed).unwrap();
            let forest = train_forest(
                &train,
                &TrainParams { n_trees: 30, bootstrap: true, seed, ..Default::default() },
            )
            .unwrap();
            let mut problem = ReconProblem::new(forest);
            problem.time_limit = Some(Duration::from_secs(120));
            problem.seed = seed;
            let t0 = Instant::now();
            let outcome = attack(&problem).unwrap();
            let status = outcome.result.status;
            let error = outcome
                .dataset
                .as_ref()
                .map(|ds| reconstruction_error(&train, ds, None).unwrap().error);
            let baseline = random_baseline(&train.schema, &train, 100, seed, None).unwrap();
            println!(
                "bagged seed {seed}: {status:?} error {error:?} baseline {baseline:.3} in {} ms",
                t0.elapsed().as_millis()
            );
        }
    }
}

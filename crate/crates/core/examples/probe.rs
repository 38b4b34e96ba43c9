use anomigan_core::data::{impute, load_csv, normalize, SchemaKind};
use anomigan_core::eval::per_layer_table;
use anomigan_core::gan::{self, PrivacyConfig, TrainOptions};
use anomigan_core::target::{train_target, TargetKind};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let which = args.get(1).map(String::as_str).unwrap_or("wdbc");
    let steps: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(5000);
    let (file, schema, kind) = match which {
        "ckd" => ("data/ckd.csv", SchemaKind::Ckd, TargetKind::Logistic),
        _ => ("data/wdbc.csv", SchemaKind::Wdbc, TargetKind::Mlp),
    };
    let ds = load_csv(std::path::Path::new(file), &schema, 7).unwrap();
    let ds = normalize(&impute(&ds).unwrap()).unwrap();
    let target = train_target(&ds, kind, 11).unwrap();
    println!("{which}: target acc {:.4} auc {:.4}", target.meta.test_accuracy, target.meta.test_auc);
    let le: f64 = std::env::var("LE").ok().and_then(|v| v.parse().ok()).unwrap_or(0.5);
    let ld: f64 = std::env::var("LD").ok().and_then(|v| v.parse().ok()).unwrap_or(0.5);
    let cfg = PrivacyConfig { seed: 5, lambda_e: le, lambda_d: ld, ..PrivacyConfig::default() };
    let batch: usize = std::env::var("BATCH").ok().and_then(|v| v.parse().ok()).unwrap_or(10);
    let opts = TrainOptions { steps, batch, ..TrainOptions::default() };
    let t0 = std::time::Instant::now();
    let model = gan::train(&ds, &target, &cfg, &opts).unwrap();
    let dt = t0.elapsed().as_secs_f64();
    println!("trained {steps} steps in {dt:.1}s ({:.2} ms/step)", dt * 1000.0 / steps as f64);
    for chunk in model.training_log.chunks(1000) {
        let m = |f: &dyn Fn(&gan::TrainLogEntry) -> f64| chunk.iter().map(|e| f(e)).sum::<f64>() / chunk.len() as f64;
        println!("  step {:>6}: dist {:.3} fool {:.3} disc {:.3} d2 {:.3}",
            chunk.last().unwrap().step, m(&|e| e.distance), m(&|e| e.loss_d1), m(&|e| e.disc_loss), m(&|e| e.loss_d2));
    }
    let tail = &model.training_log[model.training_log.len().saturating_sub(200)..];
    let mean = |f: &dyn Fn(&gan::TrainLogEntry) -> f64| tail.iter().map(|e| f(e)).sum::<f64>() / tail.len() as f64;
    println!("tail means: L_E {:.4} fool {:.4} d2 {:.4} dist {:.4} disc {:.4}",
        mean(&|e| e.loss_encoder), mean(&|e| e.loss_d1), mean(&|e| e.loss_d2),
        mean(&|e| e.distance), mean(&|e| e.disc_loss));
    // Inference-mode reconstruction quality on train records.
    {
        use anomigan_core::gan::{AnonymizeSession, InjectionPolicy};
        let mut session = AnonymizeSession::new(&model, 777).with_injection(InjectionPolicy::Off);
        let mut dist_sum = 0.0;
        let mut zeros = 0usize;
        let mut total = 0usize;
        for r in ds.train.iter().take(100) {
            let xh = session.anonymize(&r.features).unwrap();
            dist_sum += r.features.iter().zip(&xh).map(|(a,b)| (a-b)*(a-b)).sum::<f64>().sqrt();
            zeros += xh.iter().filter(|v| **v == 0.0).count();
            total += xh.len();
        }
        println!("infer-mode train dist: {:.3}, zero fraction {:.3}", dist_sum/100.0, zeros as f64 / total as f64);
    }
    let t1 = std::time::Instant::now();
    let rows = match per_layer_table(&model, &ds, &target, 20, 99) {
        Ok(r) => r,
        Err(e) => { println!("table failed: {e}"); return; }
    };
    println!("table (20 trials) in {:.1}s", t1.elapsed().as_secs_f64());
    for row in rows {
        println!("  layer {:?}: cc {:.4} acc {:.4} auc {:.4}", row.layer, row.correlation, row.accuracy, row.auc);
    }
}

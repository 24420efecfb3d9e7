//! Scratch diagnostic: what do trained advising policies actually do, and
//! what does the critic think of each joint action?

use lectr_core::advising::{build_advising_obs, AdvisingPolicySet};
use lectr_core::envs::{DomainId, Env};
use lectr_core::harness::{train_run, ExperimentConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut args = std::env::args().skip(1);
    let domain = args.next().unwrap_or_else(|| "hallway".into());
    let seed: u64 = args.next().map(|s| s.parse().unwrap()).unwrap_or(4);
    let gens: Vec<usize> = args.map(|a| a.parse().expect("generation count")).collect();
    let gens = if gens.is_empty() { vec![1, 4, 7, 10] } else { gens };

    for &g in &gens {
        let mut cfg = ExperimentConfig::default();
        cfg.domain = domain.clone();
        cfg.algorithm = "lectr".into();
        cfg.generations = g;
        if let Ok(tau) = std::env::var("LECTR_PROBE_TAU") {
            cfg.veg_tau = Some(tau.parse().expect("tau"));
        }
        let out = train_run(&cfg, seed).expect("train");
        let hits = out.result.curve.iter().filter(|c| c.train_return > 0.0).count();
        let advice: usize = out.result.curve.iter().map(|c| c.advice[0] + c.advice[1]).sum();
        println!(
            "=== {} seed={} generations={} final={:.4} tau={:.3} hits={}/{} advice/ep={:.1} ===",
            domain,
            seed,
            g,
            out.result.final_value,
            out.resolved.veg_tau.unwrap_or(f64::NAN),
            hits,
            out.result.curve.len(),
            advice as f64 / out.result.curve.len() as f64
        );

        let mut env = Env::standard(DomainId::parse(&domain).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let snap = out.advising.expect("lectr run has advising");
        let set = AdvisingPolicySet::from_snapshot(snap, cfg.advising_hyper(), &mut rng);

        // Walk the optimal joint path (agent0 left, agent1 right) and print the
        // advising decisions at every observation along the way, once with
        // fresh zero-Q learners and once with the run's trained learners.
        // Correct content on hallway: advise agent1 right (teacher 0's slot 1)
        // and agent0 left (teacher 1's slot 0).
        let fresh = [cfg.make_learner(&env).unwrap(), cfg.make_learner(&env).unwrap()];
        let trained = &out.learners;
        for (label, students) in [("fresh", &fresh), ("trained", trained)] {
            println!("  -- advice along optimal path with {label} students --");
            let mut obs = env.reset(&mut rng);
            for step in 0..7 {
                let adv_obs = build_advising_obs(obs, students, [&students[0], &students[1]]);
                let mut cells = String::new();
                for agent in 0..2 {
                    let (ask, teach) = set.action_probabilities(&adv_obs, agent);
                    let teach_str: Vec<String> =
                        teach.iter().map(|p| format!("{p:.2}")).collect();
                    cells.push_str(&format!(
                        " | a{} obs={} ask_yes={:.2} teach=[{}]",
                        agent,
                        obs.0[agent],
                        ask[1],
                        teach_str.join(",")
                    ));
                }
                println!("  step {step}{cells}");
                let res = env.step([0, 1]).unwrap();
                obs = res.obs;
                if res.done {
                    break;
                }
            }
        }
    }
}

//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any executable criterion fails.

mod common;

use std::collections::BTreeSet;
use std::ops::ControlFlow;
use std::sync::Arc;
use std::time::{Duration, Instant};

use candle_core::backprop::GradStore;
use candle_core::{DType, Device, Tensor};
use dkg_core::data::{build_vocabularies, prepare, synth, Batch, Datapoint, Prepared, PreprocessConfig, RuleTokenizer};
use dkg_core::embedding::{temporal_embedding, EncodingConfig, TemporalMode};
use dkg_core::eval::{fr_f1, set_f1, tf_f1, GoldReplay, Greedy, Silent};
use dkg_core::graph::{
    apply_commands, apply_event, commands_to_events, events_to_commands, extract_triples, merge_colored_nodes,
    ApplyMode, BeliefGraph, ConversionRules, EventKind, GraphEvent, RdfTriple, Timestamp, UpdateCommand,
};
use dkg_core::nn::{Model, ModelConfig};
use dkg_core::train::{head_losses, total_loss, LossWeights, TrainConfig, Trainer};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e(err: impl std::fmt::Display) -> String {
    err.to_string()
}

/// Exact set equality of replayed events against label-level application.
fn state_machine_oracle() -> Check {
    let start = Instant::now();
    let rules = common::rules();
    let mut commands = 0;
    for seed in 0..1000 {
        let mut rng = common::rng(seed);
        let mut graph = BeliefGraph::new();
        let mut oracle = BTreeSet::new();
        for (t, step) in common::random_steps(&mut rng, 20).iter().enumerate() {
            commands += step.len();
            let events = commands_to_events(step, &graph, t as u32, &rules).map_err(e)?;
            for event in &events {
                graph = apply_event(&graph, event, ApplyMode::Strict).map_err(e)?;
            }
            apply_commands(&mut oracle, step);
            ensure(extract_triples(&graph) == oracle, || {
                format!("seed {seed} step {t} diverged")
            })?;
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!("1000 trajectories, {commands} commands, {elapsed:.2?}"))
}

fn round_trip() -> Check {
    let start = Instant::now();
    let rules = common::rules();
    for seed in 0..1000 {
        let mut rng = common::rng(10_000 + seed);
        let (setup, commands) = common::random_command_set(&mut rng);
        let mut graph = BeliefGraph::new();
        rules
            .commands_to_events(&setup, &mut graph, 0, 0, ApplyMode::Strict)
            .map_err(e)?;
        let events = commands_to_events(&commands, &graph, 1, &rules).map_err(e)?;
        let back = events_to_commands(&events, &mut graph.clone(), ApplyMode::Strict).map_err(e)?;
        let expected: BTreeSet<UpdateCommand> = commands.iter().cloned().collect();
        ensure(back == expected, || format!("seed {seed}: {back:?} != {expected:?}"))?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!("1000 command sets, {elapsed:.2?}"))
}

fn multi_object() -> Check {
    let rules = ConversionRules::default().with_colors(["purple", "yellow"]);
    let commands = [
        UpdateCommand::add("purple potato", "table", "on"),
        UpdateCommand::add("yellow potato", "chair", "on"),
    ];
    let events = commands_to_events(&commands, &BeliefGraph::new(), 7, &rules).map_err(e)?;
    let ts = |s| Timestamp::new(7, s);
    let expected = vec![
        GraphEvent::node_add("potato", ts(0)),
        GraphEvent::node_add("purple", ts(1)),
        GraphEvent::edge_add(0, 1, "is", ts(2)),
        GraphEvent::node_add("table", ts(3)),
        GraphEvent::edge_add(0, 2, "on", ts(4)),
        GraphEvent::node_add("potato", ts(5)),
        GraphEvent::node_add("yellow", ts(6)),
        GraphEvent::edge_add(3, 4, "is", ts(7)),
        GraphEvent::node_add("chair", ts(8)),
        GraphEvent::edge_add(3, 5, "on", ts(9)),
    ];
    ensure(events == expected, || format!("got {events:?}"))?;
    let graph = BeliefGraph::replay(&events, ApplyMode::Strict).map_err(e)?;
    let potatoes = graph.nodes_labeled("potato").count();
    ensure(potatoes == 2, || format!("{potatoes} potato nodes"))?;
    let merged = merge_colored_nodes(&graph, &rules);
    let unsplit = BTreeSet::from([
        RdfTriple::new("purple potato", "table", "on"),
        RdfTriple::new("yellow potato", "chair", "on"),
    ]);
    ensure(merged == unsplit, || format!("merged {merged:?}"))?;
    Ok("10 events, two potato nodes, merge recovers both triples".into())
}

fn fixture(temporal: TemporalMode) -> Result<(Prepared, ModelConfig), String> {
    let examples = synth::generate(&synth::SynthConfig::default());
    let prepared = prepare(&examples, &PreprocessConfig::default(), &RuleTokenizer).map_err(e)?;
    let mut config = ModelConfig::default();
    config.encoding.temporal_mode = temporal;
    Ok((prepared, config))
}

fn metric_oracle() -> Check {
    let (p, _) = fixture(TemporalMode::Sinusoidal)?;
    let trajectories = p.corpus.trajectories.len();
    ensure(trajectories == 20, || format!("{trajectories} trajectories"))?;
    let tf = tf_f1(&GoldReplay, &p.corpus.datapoints).map_err(e)?;
    let fr = fr_f1(&GoldReplay, &p.corpus.trajectories, None).map_err(e)?;
    ensure(tf == 1.0 && fr == 1.0, || format!("oracle tf {tf} fr {fr}"))?;
    let silent = fr_f1(&Silent, &p.corpus.trajectories, None).map_err(e)?;
    ensure(silent == 0.0, || format!("silent fr {silent}"))?;
    let half = set_f1(&BTreeSet::from(["a", "b"]), &BTreeSet::from(["b", "c"]));
    ensure(half == 0.5, || format!("set_f1 {half}"))?;
    Ok(format!(
        "oracle tf {tf} fr {fr} over {trajectories} trajectories; set_f1 {half}"
    ))
}

fn distributions() -> Check {
    const TOL: f64 = 1e-5;
    let (p, config) = fixture(TemporalMode::Sinusoidal)?;
    let mut worst: f64 = 0.0;
    let mut steps = 0;
    for (i, dp) in p.corpus.datapoints.iter().enumerate() {
        let model = Model::new(
            config.clone(),
            p.vocab.clone(),
            None,
            i as u64,
            DType::F32,
            &Device::Cpu,
        )
        .map_err(e)?;
        let mut graph = dp.prior_graph().map_err(e)?;
        let trace = model
            .generate_trace(&dp.obs_tokens, &dp.action_tokens, &mut graph, dp.game_step, 3)
            .map_err(e)?;
        for step in trace {
            let dists = [Some(step.type_probs), step.src_probs, step.dst_probs, step.label_probs];
            for d in dists.into_iter().flatten() {
                ensure(d.iter().all(|&x| x >= 0.0), || "negative probability".into())?;
                worst = worst.max((d.iter().sum::<f64>() - 1.0).abs());
            }
            steps += 1;
        }
        if steps >= 100 {
            break;
        }
    }
    ensure(steps >= 100, || format!("only {steps} steps"))?;
    ensure(worst <= TOL, || format!("sum deviates by {worst:e}"))?;
    Ok(format!("{steps} steps, max |sum - 1| = {worst:.2e}"))
}

fn toy_config() -> ModelConfig {
    let mut c = ModelConfig {
        word_dim: 5,
        conv_layers: 2,
        conv_kernel: 3,
        ..ModelConfig::default()
    };
    c.encoding = EncodingConfig {
        h: 6,
        h_temp: 4,
        h_tau: 3,
        h_auto: 5,
        h_node: 3,
        ..EncodingConfig::default()
    };
    c
}

fn toy_datapoint() -> Datapoint {
    let ts = |g, s| Timestamp::new(g, s);
    Datapoint {
        game_id: "toy".into(),
        walkthrough_step: 1,
        random_step: 0,
        game_step: 1,
        obs_tokens: ["the", "apple", "is", "on", "the", "table", "."]
            .map(String::from)
            .to_vec(),
        action_tokens: ["take", "apple"].map(String::from).to_vec(),
        prior_events: vec![
            GraphEvent::start(ts(0, 0)),
            GraphEvent::node_add("apple", ts(0, 1)),
            GraphEvent::node_add("table", ts(0, 2)),
            GraphEvent::edge_add(0, 1, "on", ts(0, 3)),
            GraphEvent::end(ts(0, 4)),
        ],
        target_events: vec![
            GraphEvent::start(ts(1, 0)),
            GraphEvent::edge_delete(0, 1, ts(1, 1)),
            GraphEvent::node_add("player", ts(1, 2)),
            GraphEvent::edge_add(0, 2, "in", ts(1, 3)),
            GraphEvent::end(ts(1, 4)),
        ],
        previous_graph: BTreeSet::from([RdfTriple::new("apple", "table", "on")]),
        target_commands: vec![
            UpdateCommand::delete("apple", "table", "on"),
            UpdateCommand::add("apple", "player", "in"),
        ],
    }
}

const EPS: f64 = 1e-5;
const REL_TOL: f64 = 1e-5;
/// Denominator floor so near-zero gradients are compared absolutely.
const FLOOR: f64 = 1e-4;

fn scalar(t: &Tensor) -> Result<f64, String> {
    t.to_scalar::<f64>().map_err(e)
}

/// Worst relative error between autograd and central differences over a few
/// coordinates of every parameter whose name starts with one of `prefixes`.
fn grad_check(
    model: &Model,
    prefixes: &[&str],
    f: &dyn Fn() -> Result<Tensor, String>,
) -> Result<(f64, usize), String> {
    let grads: GradStore = f()?.backward().map_err(e)?;
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (name, var) in model.params().trainable_named() {
        if !prefixes.iter().any(|p| name.starts_with(p)) {
            continue;
        }
        let shape = var.as_tensor().shape().clone();
        let base: Vec<f64> = var.as_tensor().flatten_all().map_err(e)?.to_vec1().map_err(e)?;
        let analytic: Vec<f64> = match grads.get(var.as_tensor()) {
            Some(g) => g.flatten_all().map_err(e)?.to_vec1().map_err(e)?,
            None => vec![0.0; base.len()],
        };
        let n = base.len();
        for idx in BTreeSet::from([0, n / 2, n - 1]) {
            let at = |delta: f64| -> Result<f64, String> {
                let mut data = base.clone();
                data[idx] += delta;
                var.set(&Tensor::from_vec(data, shape.clone(), &Device::Cpu).map_err(e)?)
                    .map_err(e)?;
                scalar(&f()?)
            };
            let numeric = (at(EPS)? - at(-EPS)?) / (2.0 * EPS);
            at(0.0)?;
            let a = analytic[idx];
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(FLOOR));
            checked += 1;
        }
    }
    ensure(checked > 0, || format!("no parameters under {prefixes:?}"))?;
    Ok((worst, checked))
}

fn gradients() -> Check {
    let start = Instant::now();
    let dp = toy_datapoint();
    let vocab = build_vocabularies([&dp], &RuleTokenizer);
    let model = Model::new(toy_config(), vocab.clone(), None, 11, DType::F64, &Device::Cpu).map_err(e)?;
    let graph = dp.prior_graph().map_err(e)?;
    let weights_for = |rows: usize, cols: usize, seed: u64| -> Result<Tensor, String> {
        let data = dkg_core::embedding::random_word_vectors(rows + 1, cols, seed);
        let data: Vec<f64> = data[cols..].iter().map(|&x| f64::from(x)).collect();
        Tensor::from_vec(data, (rows, cols), &Device::Cpu).map_err(e)
    };
    let mut report = Vec::new();

    let attrs = model.build_attribute_matrices(&graph).map_err(e)?;
    let r = weights_for(2, 6, 1)?;
    let (a, n) = grad_check(&model, &["graph."], &|| {
        let out = model.encode_graph(&attrs).map_err(e)?;
        (out * &r).map_err(e)?.sum_all().map_err(e)
    })?;
    report.push(("graph", a, n));

    let text = weights_for(4, 6, 2)?;
    let nodes = weights_for(3, 6, 3)?;
    let (rt, rg) = (weights_for(4, 6, 4)?, weights_for(3, 6, 5)?);
    let (a, n) = grad_check(&model, &["aggregate."], &|| {
        let (t2g, g2t) = model.coattend(&text, &nodes).map_err(e)?;
        let x = (t2g * &rt).map_err(e)?.sum_all().map_err(e)?;
        let y = (g2t * &rg).map_err(e)?.sum_all().map_err(e)?;
        (x + y).map_err(e)
    })?;
    report.push(("aggregator", a, n));

    let batch = Batch::new(vec![0], vec![Arc::new(dp.clone())], &vocab);
    let weights = LossWeights::from_values(&[0.1, -0.2, 0.3, -0.4], DType::F64, &Device::Cpu).map_err(e)?;
    let (a, n) = grad_check(&model, &[""], &|| {
        let out = model.teacher_forward(&batch).map_err(e)?;
        let losses = head_losses(&out).map_err(e)?;
        weights.total(&losses.stack().map_err(e)?).map_err(e)
    })?;
    report.push(("decode step", a, n));

    let losses = Tensor::new(&[0.7f64, 1.3, 0.2, 2.5], &Device::Cpu).map_err(e)?;
    let s0 = [0.3f64, -0.5, 1.1, 0.0];
    let s = candle_core::Var::new(&s0, &Device::Cpu).map_err(e)?;
    let grads = total_loss(&losses, s.as_tensor()).map_err(e)?.backward().map_err(e)?;
    let auto: Vec<f64> = grads
        .get(s.as_tensor())
        .ok_or("no gradient for s")?
        .to_vec1()
        .map_err(e)?;
    let l = [0.7, 1.3, 0.2, 2.5];
    let mut worst: f64 = 0.0;
    for i in 0..4 {
        let analytic = -(-s0[i]).exp() * l[i] + s0[i].exp() / (1.0 + s0[i].exp());
        let f = |d: f64| -> Result<f64, String> {
            let mut v = s0;
            v[i] += d;
            scalar(&total_loss(&losses, &Tensor::new(&v, &Device::Cpu).map_err(e)?).map_err(e)?)
        };
        let numeric = (f(EPS)? - f(-EPS)?) / (2.0 * EPS);
        for x in [auto[i], numeric] {
            worst = worst.max((x - analytic).abs() / x.abs().max(analytic.abs()).max(FLOOR));
        }
    }
    report.push(("loss weights", worst, 4));

    let summary: Vec<String> = report.iter().map(|(k, a, n)| format!("{k} {a:.1e} ({n})")).collect();
    for (k, a, _) in &report {
        ensure(*a <= REL_TOL, || {
            format!("{k}: relative error {a:e}; {}", summary.join(", "))
        })?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(120), || format!("took {elapsed:?}"))?;
    Ok(format!("f64, eps {EPS:e}: {} in {elapsed:.1?}", summary.join(", ")))
}

const OVERFIT_STEPS: usize = 2000;
const CHECK_EVERY: usize = 100;

/// Trains on the fixture with the default hyperparameters, scoring the
/// training set every `CHECK_EVERY` steps until both targets are met.
fn overfit(temporal: TemporalMode, tf_target: f64, fr_target: f64) -> Result<(usize, f64, f64, Duration), String> {
    let (p, config) = fixture(temporal)?;
    let start = Instant::now();
    let model = Model::new(config, p.vocab.clone(), None, 0, DType::F32, &Device::Cpu).map_err(e)?;
    let train = TrainConfig {
        max_steps: OVERFIT_STEPS,
        eval_interval: 0,
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::new(model, train, p.rules.clone(), 0).map_err(e)?;
    loop {
        let summary = trainer
            .fit(&p.corpus, None, None, |pr| {
                if pr.stats.step % CHECK_EVERY == 0 {
                    ControlFlow::Break(())
                } else {
                    ControlFlow::Continue(())
                }
            })
            .map_err(e)?;
        let greedy = Greedy {
            model: trainer.model(),
            max_events: 100,
        };
        let tf = tf_f1(&greedy, &p.corpus.datapoints).map_err(e)?;
        let fr = if tf >= tf_target {
            fr_f1(&greedy, &p.corpus.trajectories, None).map_err(e)?
        } else {
            0.0
        };
        if (tf >= tf_target && fr >= fr_target) || summary.steps >= OVERFIT_STEPS {
            return Ok((summary.steps, tf, fr, start.elapsed()));
        }
    }
}

fn tiny_overfit() -> Check {
    let (steps, tf, fr, elapsed) = overfit(TemporalMode::Sinusoidal, 0.95, 0.90)?;
    let line = format!("{steps} steps, train TF F1 {tf:.4}, FR F1 {fr:.4}, {:.0?}", elapsed);
    ensure(tf >= 0.95 && fr >= 0.90, || line.clone())?;
    Ok(line)
}

fn ablation() -> Check {
    let (p, config) = fixture(TemporalMode::Zero)?;
    let enc = &config.encoding;
    for g in 0..40 {
        for s in 0..40 {
            let t = temporal_embedding(Timestamp::new(g, s), enc);
            ensure(t.iter().all(|&x| x == 0.0), || {
                format!("nonzero temporal embedding at ({g},{s})")
            })?;
        }
    }
    let model = Model::new(config.clone(), p.vocab.clone(), None, 0, DType::F32, &Device::Cpu).map_err(e)?;
    let dp = p
        .corpus
        .datapoints
        .iter()
        .max_by_key(|d| d.prior_events.len())
        .ok_or("empty fixture")?;
    let attrs = model
        .build_attribute_matrices(&dp.prior_graph().map_err(e)?)
        .map_err(e)?;
    for m in [&attrs.nodes, &attrs.edges] {
        let temporal = m.narrow(1, enc.h, enc.h_temp).map_err(e)?;
        let max: f32 = temporal
            .abs()
            .map_err(e)?
            .max_all()
            .map_err(e)?
            .to_scalar()
            .map_err(e)?;
        ensure(max == 0.0, || format!("attribute temporal columns reach {max}"))?;
    }
    let (steps, tf, fr, elapsed) = overfit(TemporalMode::Zero, 0.90, 0.0)?;
    let line = format!(
        "temporal embeddings all zero; {steps} steps, train TF F1 {tf:.4}, {:.0?}",
        elapsed
    );
    let _ = fr;
    ensure(tf >= 0.90, || line.clone())?;
    Ok(line)
}

fn mask_table() -> Check {
    let ts = |s| Timestamp::new(1, s);
    let events = [
        GraphEvent::end(ts(1)),
        GraphEvent::start(ts(1)),
        GraphEvent::node_add("knife", ts(1)),
        GraphEvent::node_delete(2, ts(1)),
        GraphEvent::edge_add(1, 0, "under", ts(1)),
        GraphEvent::edge_delete(0, 1, ts(1)),
    ];
    let mut base = toy_datapoint();
    base.prior_events
        .insert(4, GraphEvent::node_add("spoon", Timestamp::new(0, 4)));
    base.prior_events.last_mut().unwrap().ts = Timestamp::new(0, 5);
    let dps: Vec<Arc<Datapoint>> = events
        .iter()
        .map(|ev| {
            let mut dp = base.clone();
            let mut ev = ev.clone();
            ev.ts = ts(1);
            dp.target_events = vec![GraphEvent::start(ts(0)), ev, GraphEvent::end(ts(2))];
            Arc::new(dp)
        })
        .collect();
    let vocab = build_vocabularies(dps.iter().map(|d| d.as_ref()), &RuleTokenizer);
    let config = toy_config();
    let model = Model::new(config.clone(), vocab.clone(), None, 5, DType::F64, &Device::Cpu).map_err(e)?;
    let graph = base.prior_graph().map_err(e)?;
    let (h_tau, h) = (config.encoding.h_tau, config.encoding.h);
    for (dp, event) in dps.iter().zip(&events) {
        let kind = event.kind;
        let mask = kind.mask();
        ensure(kind == EventKind::ALL[kind.id()], || format!("{kind:?} id"))?;

        let emb = model.embed_event(event, &graph).map_err(e)?;
        for (i, present) in [mask.src, mask.dst, mask.label].into_iter().enumerate() {
            let seg = emb.narrow(0, h_tau + i * h, h).map_err(e)?;
            let norm = scalar(&seg.abs().map_err(e)?.sum_all().map_err(e)?)?;
            ensure((norm > 0.0) == present, || {
                format!("{kind:?}: embedding segment {i} norm {norm}")
            })?;
        }

        let batch = Batch::new(vec![0], vec![dp.clone()], &vocab);
        let g = &batch.targets;
        let grid = [g.src_mask[0] == 1.0, g.dst_mask[0] == 1.0, g.label_mask[0] == 1.0];
        let out = model.teacher_forward(&batch).map_err(e)?;
        let t = &out.targets;
        let active = [t.src_active[0], t.dst_active[0], t.label_active[0]];
        let heads = [mask.src, mask.dst, mask.label];
        ensure(grid == heads && active == heads, || {
            format!("{kind:?}: loss masks {grid:?} {active:?}")
        })?;

        let step = model
            .decode_step(&dp.obs_tokens, &dp.action_tokens, &graph, 1, kind)
            .map_err(e)?;
        let decoded = [
            step.src_probs.is_some(),
            step.dst_probs.is_some(),
            step.label_probs.is_some(),
        ];
        ensure(decoded == heads, || format!("{kind:?}: decoding ran heads {decoded:?}"))?;
    }
    Ok("6 kinds agree across embedding, loss masking and decoding".into())
}

fn main() {
    let criteria: [(&str, &dyn Fn() -> Check); 9] = [
        ("1 state-machine oracle", &state_machine_oracle),
        ("2 round trip", &round_trip),
        ("3 multi-object fidelity", &multi_object),
        ("4 metric oracle", &metric_oracle),
        ("5 distribution validity", &distributions),
        ("6 gradient checks", &gradients),
        ("7 tiny overfit", &tiny_overfit),
        ("8 ablation", &ablation),
        ("10 mask table", &mask_table),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in criteria {
        let number = name.split(' ').next().unwrap();
        if !only.is_empty() && !only.iter().any(|o| o == number) {
            continue;
        }
        match check() {
            Ok(detail) => println!("criterion {name}: PASS ({detail})"),
            Err(detail) => {
                failed += 1;
                println!("criterion {name}: FAIL ({detail})");
            }
        }
    }
    if only.is_empty() || only.iter().any(|o| o == "9") {
        println!(
            "criterion 9 full-scale run: DOCUMENTED (needs the real dataset and word vectors; see README, Full-scale run)"
        );
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

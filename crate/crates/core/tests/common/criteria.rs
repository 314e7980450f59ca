//! One check per acceptance criterion. Each returns a short summary on
//! success and a description of the first problems on failure. The
//! integration tests and the `acceptance` binary both call these.

use std::cell::Cell;
use std::collections::{BTreeMap, HashMap};
use std::time::{Duration, Instant};

use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use modvqa_core::backend::wire::{decode_request, decode_response, encode_response, encode_request, op_for_path};
use modvqa_core::backend::{Op, OracleBackend, RecordingBackend, ReplayBackend, SceneGraph, calls_to_jsonl};
use modvqa_core::eval::{
    evaluate_soft, ood_filter, run_pipeline, traces_to_jsonl, ObjectList, PipelineOptions,
    DEFAULT_TEST_PORTION,
};
use modvqa_core::exec::{execute, run_logic, without_wall_times, ExecInput, ExecutionConfig};
use modvqa_core::geometry::{spc_labels, spd, Axis, BoundingBox, Position};
use modvqa_core::layout::{
    from_postorder, parse_layout, parse_postorder, print_postorder, to_postorder, Layout,
    LayoutNode, ModuleName,
};
use modvqa_core::plan::{compile, synthesize_grounding, LogicOp, PlanStep, ZeroShotPlan};

use super::backends::{Fixed, Spy};
use super::brute::Brute;
use super::{gen, mini_dir, mini_oracle, mini_questions, mini_vocab};

pub type Outcome = Result<String, String>;

pub const FUZZ_CASES: u32 = 1000;

fn fail(problems: Vec<String>) -> Outcome {
    let shown: Vec<String> = problems.iter().take(5).cloned().collect();
    Err(format!("{} problem(s): {}", problems.len(), shown.join("; ")))
}

fn runner() -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases: FUZZ_CASES,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

/// Layouts and the step kinds they must compile to, written out by hand.
pub const GOLDEN: &[(&str, &[&str])] = &[
    ("Exist(Find[car])", &["exist_object"]),
    ("Exist(Filter[red](Find[car]))", &["detect", "threshold_select", "exist_attr"]),
    ("Exist(Filter[red](Filter[shiny](Find[car])))", &["detect", "threshold_select", "exist_attr"]),
    (
        "Exist(Relocate[on](Find[table]))",
        &["ground", "threshold_select", "detect", "threshold_select", "exist_rela"],
    ),
    (
        "Exist(Filter[white](Relocate[on](Find[table])))",
        &["ground", "threshold_select", "exist_attr", "detect", "threshold_select", "exist_rela", "logic"],
    ),
    (
        "Exist(Relocate[holding](Filter[green](Find[bottle])))",
        &[
            "ground", "threshold_select", "ground", "threshold_select", "exist_rela", "detect",
            "threshold_select", "exist_attr", "logic",
        ],
    ),
    ("And(Exist(Find[dog]), Exist(Find[cat]))", &["exist_object", "exist_object", "logic"]),
    (
        "Or(Exist(Find[dog]), Exist(Filter[black](Find[cat])))",
        &["exist_object", "detect", "threshold_select", "exist_attr", "logic"],
    ),
    ("Count(Find[car])", &["detect", "threshold_select", "count"]),
    ("Count(Filter[red](Find[car]))", &["ground", "threshold_select", "count"]),
    ("Count(Relocate[on](Find[sofa]))", &["ground", "threshold_select", "count"]),
    ("Count(Relocate[in](Filter[wicker](Find[basket])))", &["ground", "threshold_select", "count"]),
    ("Query[name](Find[cup])", &["detect", "threshold_select", "region", "match_texts"]),
    (
        "Query[name](Relocate[to the left of](Find[garbage bin]))",
        &["ground", "threshold_select", "region", "match_texts"],
    ),
    ("Query[color](Filter[red](Find[apple]))", &["ground", "threshold_select", "region", "match_texts"]),
    (
        "Query[name](Filter[small](Relocate[on](Filter[green](Find[bench]))))",
        &["ground", "threshold_select", "region", "match_texts"],
    ),
    ("Query[hposition](Find[tree])", &["detect", "threshold_select", "spd"]),
    ("Query[vposition](Relocate[above](Find[sink]))", &["ground", "threshold_select", "spd"]),
    (
        "Choose[to the left of;to the right of](Find[cup], Find[plate])",
        &["detect", "threshold_select", "detect", "threshold_select", "spc"],
    ),
    (
        "Choose[above;below](Filter[round](Find[clock]), Find[door])",
        &["ground", "threshold_select", "detect", "threshold_select", "spc"],
    ),
    (
        "Choose[holding;wearing](Find[boy], Find[kite])",
        &["detect", "threshold_select", "detect", "threshold_select", "region", "match_texts"],
    ),
    (
        "Compare[taller](Find[boy], Find[girl])",
        &["detect", "threshold_select", "detect", "threshold_select", "region", "match_texts"],
    ),
    (
        "Compare[bigger;the horse;the dog](Find[horse], Relocate[next to](Find[horse]))",
        &["detect", "threshold_select", "ground", "threshold_select", "region", "match_texts"],
    ),
];

fn chain_length(node: &LayoutNode) -> usize {
    let mut n = 1;
    let mut cur = node;
    while cur.module != ModuleName::Find {
        cur = &cur.children[0];
        n += 1;
    }
    n
}

/// Every detector/grounder call must match the length of the chain it
/// locates: one module means the detector, more means the grounder.
fn source_rule_problems(layout: &Layout, plan: &ZeroShotPlan) -> Vec<String> {
    let nodes = layout.postorder_nodes();
    let mut problems = Vec::new();
    for (i, step) in plan.steps.iter().enumerate() {
        let is_detect = match step {
            PlanStep::Detect { .. } => true,
            PlanStep::Ground { .. } => false,
            _ => continue,
        };
        let Some(&top) = plan.provenance[i].nodes.iter().max() else {
            problems.push(format!("{}: step #{i} has no source node", layout.to_canonical()));
            continue;
        };
        let len = chain_length(nodes[top]);
        if is_detect != (len == 1) {
            problems.push(format!(
                "{}: step #{i} is {} for a chain of length {len}",
                layout.to_canonical(),
                step.kind()
            ));
        }
    }
    problems
}

pub fn compiler_conformance() -> Outcome {
    let start = Instant::now();
    let mut problems = Vec::new();
    let mut roots = std::collections::BTreeSet::new();
    for (text, want) in GOLDEN {
        let layout = parse_layout(text).map_err(|e| format!("{text}: {e}"))?;
        roots.insert(layout.root.module);
        let plan = match compile(&layout) {
            Ok(p) => p,
            Err(e) => {
                problems.push(format!("{text}: {e}"));
                continue;
            }
        };
        let got: Vec<&str> = plan.steps.iter().map(PlanStep::kind).collect();
        if got != *want {
            problems.push(format!("{text}: got {got:?}"));
        }
        problems.extend(source_rule_problems(&layout, &plan));
    }
    let elapsed = start.elapsed();
    if roots.len() != 7 {
        problems.push(format!("golden suite covers only {roots:?}"));
    }
    if elapsed >= Duration::from_secs(1) {
        problems.push(format!("golden suite took {elapsed:?}"));
    }

    let fuzzed = Cell::new(0usize);
    let result = runner().run(&gen::compilable_layout(), |layout| {
        let plan = compile(&layout).map_err(|e| TestCaseError::fail(format!("{}: {e}", layout.to_canonical())))?;
        let p = source_rule_problems(&layout, &plan);
        if !p.is_empty() {
            return Err(TestCaseError::fail(p.join("; ")));
        }
        fuzzed.set(fuzzed.get() + 1);
        Ok(())
    });
    if let Err(e) = result {
        problems.push(format!("fuzzed layouts: {e}"));
    }
    if problems.is_empty() {
        Ok(format!(
            "{} golden layouts over 7 root types in {elapsed:?}; source rule held on {} fuzzed layouts",
            GOLDEN.len(),
            fuzzed.get()
        ))
    } else {
        fail(problems)
    }
}

pub fn mini_aliases() -> HashMap<String, String> {
    let text = std::fs::read_to_string(mini_dir().join("scenes/aliases.json")).expect("aliases");
    serde_json::from_str(&text).expect("aliases parse")
}

pub fn oracle_exactness() -> Outcome {
    let oracle = mini_oracle();
    let questions = mini_questions();
    let vocab = mini_vocab();
    let aliases = mini_aliases();
    let images: std::collections::BTreeSet<&str> = questions.iter().map(|q| q.image_id.as_str()).collect();
    let types: std::collections::BTreeSet<&str> = questions.iter().map(|q| q.qtype.as_str()).collect();
    let mut problems = Vec::new();
    if questions.len() < 50 || images.len() < 10 || types.len() < 6 {
        problems.push(format!(
            "mini-dataset too small: {} questions, {} images, {} types",
            questions.len(),
            images.len(),
            types.len()
        ));
    }
    let expected: HashMap<String, Option<String>> = questions
        .iter()
        .map(|q| {
            let brute = Brute {
                scene: oracle.scene(&q.image_id).expect("scene"),
                aliases: &aliases,
                vocab: vocab.candidates(),
            };
            let layout = q.parsed_layout().expect("layout");
            (q.question_id.clone(), brute.answer(&layout.root))
        })
        .collect();
    let start = Instant::now();
    let options = PipelineOptions {
        vocabulary: Some(vocab.clone()),
        ..PipelineOptions::default()
    };
    let out = run_pipeline(&questions, &oracle, &options);
    let elapsed = start.elapsed();
    for p in &out.predictions {
        match &expected[&p.question_id] {
            Some(want) if !p.is_failed() && *want == p.answer => {}
            want => problems.push(format!("{}: engine {:?} {:?}, brute force {want:?}", p.question_id, p.answer, p.failure)),
        }
    }
    if elapsed >= Duration::from_secs(5) {
        problems.push(format!("pipeline took {elapsed:?}"));
    }
    if problems.is_empty() {
        Ok(format!(
            "{}/{} answers equal the brute-force evaluator over {} scenes in {elapsed:?}",
            out.predictions.len(),
            questions.len(),
            images.len()
        ))
    } else {
        fail(problems)
    }
}

fn grid() -> impl Iterator<Item = f64> + Clone {
    (0..=100).map(|i| i as f64 / 100.0)
}

fn at(x: f64, y: f64) -> BoundingBox {
    BoundingBox { x, y, w: 0.0, h: 0.0 }
}

/// Label pairs: the first entry is the label for "comes first on the axis".
const SPATIAL_PAIRS: &[(Axis, &str, &str)] = &[
    (Axis::Horizontal, "to the left of", "to the right of"),
    (Axis::Vertical, "above", "beneath"),
    (Axis::Vertical, "above", "below"),
    (Axis::Vertical, "on top of", "under"),
    (Axis::Vertical, "above", "underneath"),
];

pub fn spatial_heuristics() -> Outcome {
    let mut problems = Vec::new();
    let mut checked = 0usize;
    for a in grid() {
        for other in grid() {
            let want_h = if a < 0.5 { Position::Left } else { Position::Right };
            let want_v = if a < 0.5 { Position::Top } else { Position::Bottom };
            if spd(&at(a, other), Axis::Horizontal) != want_h {
                problems.push(format!("SpD horizontal at x={a}"));
            }
            if spd(&at(other, a), Axis::Vertical) != want_v {
                problems.push(format!("SpD vertical at y={a}"));
            }
            checked += 2;
        }
    }
    let mut antisym = 0usize;
    for &(axis, before, after) in SPATIAL_PAIRS {
        for v1 in grid() {
            for v2 in grid() {
                let (b1, b2) = match axis {
                    Axis::Horizontal => (at(v1, 0.3), at(v2, 0.7)),
                    Axis::Vertical => (at(0.3, v1), at(0.7, v2)),
                };
                let want = if v1 < v2 { before } else { after };
                for (first, second) in [(before, after), (after, before)] {
                    match spc_labels(&b1, &b2, first, second) {
                        Ok(got) if got == want => {}
                        got => problems.push(format!("SpC {first}/{second} at {v1},{v2}: {got:?}")),
                    }
                    checked += 1;
                }
                if v1 != v2 {
                    let fwd = spc_labels(&b1, &b2, before, after).unwrap_or_default();
                    let back = spc_labels(&b2, &b1, before, after).unwrap_or_default();
                    if fwd == back {
                        problems.push(format!("SpC not antisymmetric at {v1},{v2}: {fwd}"));
                    }
                    antisym += 1;
                }
            }
        }
    }
    if problems.is_empty() {
        Ok(format!("{checked} grid checks, {antisym} antisymmetric pairs"))
    } else {
        fail(problems)
    }
}

pub fn logic_truth_tables() -> Outcome {
    let mut problems = Vec::new();
    let config = ExecutionConfig::default();
    for (op, module) in [(LogicOp::And, "And"), (LogicOp::Or, "Or")] {
        for l in [false, true] {
            for r in [false, true] {
                let want = match op {
                    LogicOp::And => l && r,
                    LogicOp::Or => l || r,
                };
                if run_logic(op, l, r) != want {
                    problems.push(format!("run_logic {op:?}({l}, {r})"));
                }
                let mut backend = Fixed::default();
                if l {
                    backend = backend.with("apple", &[0.9]);
                }
                if r {
                    backend = backend.with("pear", &[0.9]);
                }
                let layout = parse_layout(&format!("{module}(Exist(Find[apple]), Exist(Find[pear]))")).unwrap();
                let plan = compile(&layout).unwrap();
                let got = execute(&plan, ExecInput::new("img"), &backend, &config);
                let want = if want { "yes" } else { "no" };
                if got.answer != want {
                    problems.push(format!("{module}({l}, {r}) answered {:?}", got.answer));
                }
            }
        }
    }
    if problems.is_empty() {
        Ok("8/8 rows for And and Or, direct and through the executor".into())
    } else {
        fail(problems)
    }
}

/// Existence layouts over the mini scenes whose nouns are absent.
pub const MISSING_OBJECT: &[(&str, &str)] = &[
    ("street-01", "Exist(Find[unicorn])"),
    ("street-01", "Exist(Filter[red](Find[unicorn]))"),
    ("kitchen-01", "Exist(Filter[red](Filter[big](Find[fork])))"),
    ("kitchen-01", "Exist(Relocate[on](Find[stove]))"),
    ("living-01", "Exist(Filter[white](Relocate[on](Find[bed])))"),
    ("park-01", "Exist(Relocate[holding](Filter[red](Find[balloon])))"),
    ("office-01", "And(Exist(Filter[black](Find[printer])), Exist(Filter[red](Find[stapler])))"),
    ("farm-01", "Or(Exist(Filter[pink](Find[pig])), Exist(Relocate[on](Find[tractor])))"),
];

pub fn conjunction_scene() -> SceneGraph {
    SceneGraph::from_json(
        r#"{"image_id":"conj","width":100,"height":100,"objects":[
        {"id":"car1","name":"car","box":{"x":0.05,"y":0.6,"w":0.2,"h":0.2},"attributes":["red","shiny","new"]},
        {"id":"car2","name":"car","box":{"x":0.7,"y":0.6,"w":0.2,"h":0.2},"attributes":["blue"]},
        {"id":"table","name":"table","box":{"x":0.3,"y":0.5,"w":0.35,"h":0.3},"attributes":["wooden","brown"]},
        {"id":"cup","name":"cup","box":{"x":0.35,"y":0.45,"w":0.05,"h":0.05},"attributes":["white","small"],
         "relations":[{"relation":"on","target":"table"}]},
        {"id":"plate","name":"plate","box":{"x":0.5,"y":0.47,"w":0.1,"h":0.03},"attributes":["white"],
         "relations":[{"relation":"on","target":"table"}]},
        {"id":"man","name":"man","box":{"x":0.4,"y":0.1,"w":0.1,"h":0.4},"attributes":["tall"],
         "relations":[{"relation":"is holding","target":"cup"}]}
    ]}"#,
    )
    .expect("conjunction scene")
}

pub const CONJUNCTIONS: &[&str] = &[
    "Exist(Filter[red](Filter[shiny](Find[car])))",
    "Exist(Filter[red](Filter[old](Find[car])))",
    "Exist(Filter[new](Filter[shiny](Filter[red](Find[car]))))",
    "Exist(Filter[new](Filter[rusty](Filter[red](Find[car]))))",
    "Exist(Filter[brown](Filter[wooden](Find[table])))",
    "Exist(Filter[brown](Filter[glass](Find[table])))",
    "Exist(Filter[white](Relocate[on](Find[table])))",
    "Exist(Filter[small](Filter[white](Relocate[on](Find[table]))))",
    "Exist(Filter[large](Filter[white](Relocate[on](Find[table]))))",
    "Exist(Filter[white](Relocate[on](Filter[glass](Find[table]))))",
    "Exist(Filter[white](Relocate[on](Filter[wooden](Find[table]))))",
    "Exist(Relocate[holding](Filter[white](Find[cup])))",
    "Exist(Relocate[holding](Filter[black](Find[cup])))",
    "Exist(Filter[tall](Relocate[holding](Filter[small](Find[cup]))))",
    "Exist(Filter[short](Relocate[holding](Find[cup])))",
    "Exist(Relocate[under](Find[table]))",
];

pub fn existence_workflows() -> Outcome {
    let mut problems = Vec::new();
    let config = ExecutionConfig::default();
    let spy = Spy::new(mini_oracle());
    for (image, text) in MISSING_OBJECT {
        spy.reset();
        let plan = compile(&parse_layout(text).unwrap()).unwrap();
        let got = execute(&plan, ExecInput::new(image), &spy, &config);
        if got.answer != "no" || !got.is_ok() {
            problems.push(format!("{text}: answered {:?} ({:?})", got.answer, got.status));
        }
        if spy.count(Op::Match) != 0 {
            problems.push(format!("{text}: {} match calls", spy.count(Op::Match)));
        }
    }

    let scene = conjunction_scene();
    let aliases = HashMap::new();
    let brute = Brute {
        scene: &scene,
        aliases: &aliases,
        vocab: &[],
    };
    let oracle = OracleBackend::new([scene.clone()]);
    let mut tally: BTreeMap<&str, usize> = BTreeMap::new();
    for text in CONJUNCTIONS {
        let layout = parse_layout(text).unwrap();
        let want = brute.answer(&layout.root).unwrap();
        let plan = compile(&layout).unwrap();
        let got = execute(&plan, ExecInput::new("conj"), &oracle, &config);
        if got.answer != want {
            problems.push(format!("{text}: answered {:?}, expected {want}", got.answer));
        }
        *tally.entry(if want == "yes" { "yes" } else { "no" }).or_default() += 1;
    }
    if tally.get("yes").copied().unwrap_or(0) < 4 || tally.get("no").copied().unwrap_or(0) < 4 {
        problems.push(format!("conjunction cases are one-sided: {tally:?}"));
    }
    if problems.is_empty() {
        Ok(format!(
            "{} missing-object layouts answered no with 0 match calls; {} conjunction cases exact ({tally:?})",
            MISSING_OBJECT.len(),
            CONJUNCTIONS.len()
        ))
    } else {
        fail(problems)
    }
}

pub const SWEEP_SCORES: &[f64] = &[0.03, 0.05, 0.08, 0.12, 0.15, 0.19, 0.2, 0.21, 0.25, 0.3, 0.31, 0.6];

pub fn sweep() -> Vec<f64> {
    (5..=30).map(|i| i as f64 / 100.0).collect()
}

pub fn threshold_behavior() -> Outcome {
    let mut problems = Vec::new();
    let grounded = parse_layout("Count(Filter[red](Find[car]))").unwrap();
    let sentence = synthesize_grounding(&grounded.root.children[0]).unwrap().sentence;
    let backend = Fixed::default()
        .with("car", SWEEP_SCORES)
        .with(&sentence, &[0.65, 0.7, 0.9]);
    let detected = compile(&parse_layout("Count(Find[car])").unwrap()).unwrap();
    let grounded = compile(&grounded).unwrap();
    let mut counts = Vec::new();
    for t in sweep() {
        let config = ExecutionConfig {
            detector_threshold: t,
            ..ExecutionConfig::default()
        };
        let got = execute(&detected, ExecInput::new("img"), &backend, &config);
        let n: usize = match got.answer.parse() {
            Ok(n) => n,
            Err(_) => {
                problems.push(format!("threshold {t}: answer {:?}", got.answer));
                continue;
            }
        };
        let want = SWEEP_SCORES.iter().filter(|&&s| s >= t).count();
        if n != want {
            problems.push(format!("threshold {t}: counted {n}, expected {want}"));
        }
        if counts.last().is_some_and(|&prev| n > prev) {
            problems.push(format!("threshold {t}: count rose to {n}"));
        }
        counts.push(n);
        let g = execute(&grounded, ExecInput::new("img"), &backend, &config);
        if g.answer != "2" {
            problems.push(format!("threshold {t}: grounded count {:?} moved with the detector threshold", g.answer));
        }
    }
    if problems.is_empty() {
        Ok(format!("counts over 0.05..=0.30: {counts:?}"))
    } else {
        fail(problems)
    }
}

pub fn round_trips() -> Outcome {
    let mut problems = Vec::new();
    let dsl = Cell::new(0usize);
    let r = runner().run(&gen::layout(), |layout| {
        let text = layout.to_canonical();
        let back = parse_layout(&text).map_err(|e| TestCaseError::fail(format!("{text}: {e}")))?;
        if back != layout || back.to_canonical() != text {
            return Err(TestCaseError::fail(format!("{text} came back as {}", back.to_canonical())));
        }
        let printed = print_postorder(&to_postorder(&layout));
        let steps = parse_postorder(&printed).map_err(|e| TestCaseError::fail(format!("{printed}: {e}")))?;
        let back = from_postorder(&steps).map_err(|e| TestCaseError::fail(format!("{printed}: {e}")))?;
        if back != layout {
            return Err(TestCaseError::fail(format!("post-order {printed} came back as {}", back.to_canonical())));
        }
        dsl.set(dsl.get() + 1);
        Ok(())
    });
    if let Err(e) = r {
        problems.push(format!("layouts: {e}"));
    }
    let wire = Cell::new(0usize);
    let r = runner().run(&gen::exchange(), |(req, outcome)| {
        let (path, body) = encode_request(&req);
        let op = op_for_path(path).ok_or_else(|| TestCaseError::fail(format!("no op for {path}")))?;
        let back = decode_request(op, &body).map_err(|e| TestCaseError::fail(format!("{body}: {e}")))?;
        if back != req {
            return Err(TestCaseError::fail(format!("request {body} came back as {back:?}")));
        }
        let (status, body) = encode_response(&outcome);
        let back = decode_response(op, status, &body).map_err(|e| TestCaseError::fail(format!("{body}: {e}")))?;
        if back != outcome {
            return Err(TestCaseError::fail(format!("response {body} came back as {back:?}")));
        }
        wire.set(wire.get() + 1);
        Ok(())
    });
    if let Err(e) = r {
        problems.push(format!("wire: {e}"));
    }
    if problems.is_empty() {
        Ok(format!(
            "{} layouts through DSL and post-order, {} wire exchanges",
            dsl.get(),
            wire.get()
        ))
    } else {
        fail(problems)
    }
}

pub fn trace_replay() -> Outcome {
    let questions = mini_questions();
    let options = PipelineOptions {
        vocabulary: Some(mini_vocab()),
        ..PipelineOptions::default()
    };
    let recorder = RecordingBackend::new(mini_oracle());
    let first = run_pipeline(&questions, &recorder, &options);
    let log = calls_to_jsonl(&recorder.calls());
    let replay = ReplayBackend::from_jsonl(&log).map_err(|e| format!("recorded log does not parse: {e}"))?;
    let second = run_pipeline(&questions, &replay, &options);

    let strip = |traces: &[(String, Vec<modvqa_core::exec::TraceEvent>)]| {
        let stripped: Vec<_> = traces
            .iter()
            .map(|(id, t)| (id.clone(), without_wall_times(t)))
            .collect();
        traces_to_jsonl(&stripped)
    };
    let answers = |out: &modvqa_core::eval::PipelineOutput| -> String {
        out.predictions
            .iter()
            .map(|p| serde_json::to_string(p).unwrap() + "\n")
            .collect()
    };
    let mut problems = Vec::new();
    if answers(&first) != answers(&second) {
        problems.push("replayed answers differ".to_string());
    }
    let (a, b) = (strip(&first.traces), strip(&second.traces));
    if a != b {
        let line = a.lines().zip(b.lines()).position(|(x, y)| x != y).unwrap_or(0);
        problems.push(format!("replayed traces differ from line {line}"));
    }
    if problems.is_empty() {
        Ok(format!(
            "{} questions, {} recorded calls, {} trace bytes identical",
            questions.len(),
            replay.len(),
            a.len()
        ))
    } else {
        fail(problems)
    }
}

fn food_names() -> Vec<String> {
    let text = std::fs::read_to_string(
        std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data/food_objects.txt"),
    )
    .expect("food list");
    text.split([',', '\n'])
        .map(|s| s.trim().to_lowercase())
        .filter(|s| !s.is_empty())
        .collect()
}

pub fn metrics() -> Outcome {
    let mut problems = Vec::new();
    for n in 0..=10usize {
        let answers: Vec<String> = (0..10).map(|i| if i < n { "cat" } else { "dog" }.to_string()).collect();
        let want = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0][n.min(3)];
        match evaluate_soft("cat", &answers) {
            Ok(got) if got == want => {}
            got => problems.push(format!("{n} matches scored {got:?}, expected {want}")),
        }
    }

    let food = food_names();
    let others = ["car", "tree", "road", "sky", "person", "building", "dog", "sign"];
    let mut runner = runner();
    let split_sizes = Cell::new((0usize, 0usize, 0usize));
    let strategy = proptest::collection::vec(
        proptest::collection::vec((proptest::bool::ANY, 0..64usize), 1..8),
        1..30,
    );
    let list = ObjectList::food();
    let r = runner.run(&strategy, |images| {
        let mut scenes = HashMap::new();
        let mut ids = Vec::new();
        let mut listed_share = HashMap::new();
        for (i, objects) in images.iter().enumerate() {
            let id = format!("img{i}");
            let names: Vec<String> = objects
                .iter()
                .map(|&(is_food, k)| if is_food { food[k % food.len()].clone() } else { others[k % others.len()].to_string() })
                .collect();
            let listed = objects.iter().filter(|o| o.0).count();
            listed_share.insert(id.clone(), (listed, names.len()));
            let objs: Vec<String> = names
                .iter()
                .enumerate()
                .map(|(j, n)| {
                    format!(
                        r#"{{"id":"o{j}","name":"{n}","box":{{"x":{},"y":0.1,"w":0.01,"h":0.01}}}}"#,
                        j as f64 / 10.0
                    )
                })
                .collect();
            let scene = SceneGraph::from_json(&format!(
                r#"{{"image_id":"{id}","width":10,"height":10,"objects":[{}]}}"#,
                objs.join(",")
            ))
            .map_err(|e| TestCaseError::fail(e.to_string()))?;
            scenes.insert(id.clone(), scene);
            ids.push(id);
        }
        let split = ood_filter(&ids, &scenes, &list, DEFAULT_TEST_PORTION)
            .map_err(|e| TestCaseError::fail(e.to_string()))?;
        for id in &split.train {
            if listed_share[id].0 != 0 {
                return Err(TestCaseError::fail(format!("{id} in train has listed objects")));
            }
        }
        for id in &split.test {
            let (l, n) = listed_share[id];
            if (l as f64) < DEFAULT_TEST_PORTION * n as f64 {
                return Err(TestCaseError::fail(format!("{id} in test has share {l}/{n}")));
            }
        }
        for id in &ids {
            let (l, n) = listed_share[id];
            let placed = split.train.contains(id) || split.test.contains(id);
            let should = l == 0 || l as f64 >= DEFAULT_TEST_PORTION * n as f64;
            if placed != should {
                return Err(TestCaseError::fail(format!("{id} ({l}/{n}) placed={placed}")));
            }
        }
        let (tr, te, all) = split_sizes.get();
        split_sizes.set((tr + split.train.len(), te + split.test.len(), all + ids.len()));
        Ok(())
    });
    if let Err(e) = r {
        problems.push(format!("ood: {e}"));
    }
    let split_sizes = split_sizes.get();
    if problems.is_empty() {
        Ok(format!(
            "soft score exact for 0..=10 matches; OOD over {} synthetic images: {} train (none listed), {} test",
            split_sizes.2, split_sizes.0, split_sizes.1
        ))
    } else {
        fail(problems)
    }
}

pub type Criterion = (&'static str, fn() -> Outcome);

pub const ALL: &[Criterion] = &[
    ("compiler rule conformance", compiler_conformance),
    ("oracle end-to-end exactness", oracle_exactness),
    ("spatial heuristics", spatial_heuristics),
    ("logic truth tables", logic_truth_tables),
    ("existence workflows", existence_workflows),
    ("threshold behavior", threshold_behavior),
    ("round-trips", round_trips),
    ("trace replay", trace_replay),
    ("metrics", metrics),
];

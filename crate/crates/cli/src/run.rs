//! Command implementations behind the CLI surface.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context};
use serde::Serialize;

use textshift::attributes::{code_attributes, load_lexicon, FeatureSpec, Lexicon};
use textshift::corpus::{
    load_corpus, load_corpus_as, split_corpus, write_corpus, Corpus, Document, Role, SplitSpec,
};
use textshift::density_ratio::{
    clf_weights, fit_ngram_lm, lm_weights, targeting_from_weights, train_ratio_classifier,
    LmProviderConfig, PromptTargeting, WeightDiagnostics, WeightMethod, WeightSet,
};
use textshift::estimator::{natural_effect, CiSpec, EffectEstimate};
use textshift::evaluation::{evaluate_transport, EvalConfig, WeightBackend, LOW_ESS_FRACTION};
use textshift::stats::derive_seed;
use textshift::synth::{self, SyntheticSpace};

use crate::output::OutputGuard;
use crate::{
    Cli, CodeArgs, Command, EstimateArgs, EvalArgs, FeatureSelection, FeaturesArg, FormatArg,
    LmBackendArg, MethodArg, MethodSelection, PresetArg, SynthArgs, WeightsArgs,
};

const API_KEY_VAR: &str = "TEXTSHIFT_API_KEY";
const ENDPOINT_VAR: &str = "TEXTSHIFT_LM_ENDPOINT";

pub fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Code(args) => code(args),
        Command::Weights(args) => weights(args),
        Command::Estimate(args) => estimate(args),
        Command::Eval(args) => eval(args),
        Command::Synth(args) => synth(args),
    }
}

fn load(path: &Path, role: Role, format: Option<FormatArg>) -> anyhow::Result<Corpus> {
    let corpus = match format {
        Some(f) => load_corpus_as(path, role, f.into())?,
        None => load_corpus(path, role)?,
    };
    Ok(corpus)
}

fn feature_spec(features: &FeatureSelection) -> FeatureSpec {
    match features.features {
        FeaturesArg::Lexicon => FeatureSpec::LexiconBinary,
        FeaturesArg::Bow => FeatureSpec::BagOfWords {
            vocab_size: features.vocab_size,
        },
        FeaturesArg::External => FeatureSpec::External,
    }
}

fn load_optional_lexicon(features: &FeatureSelection) -> anyhow::Result<Option<Lexicon>> {
    match &features.lexicon {
        Some(path) => Ok(Some(load_lexicon(path)?)),
        None => Ok(None),
    }
}

/// Connection settings for the http backend. The endpoint comes from
/// --endpoint or TEXTSHIFT_LM_ENDPOINT; the key only ever from
/// TEXTSHIFT_API_KEY.
fn provider_config(method: &MethodSelection) -> anyhow::Result<LmProviderConfig> {
    let endpoint = match &method.endpoint {
        Some(e) => e.clone(),
        None => std::env::var(ENDPOINT_VAR).map_err(|_| {
            anyhow!("the http backend needs a scoring endpoint: pass --endpoint or set {ENDPOINT_VAR}")
        })?,
    };
    let prompt_r = method
        .prompt_r
        .clone()
        .ok_or_else(|| anyhow!("--lm-backend http requires --prompt-r"))?;
    let prompt_t = method
        .prompt_t
        .clone()
        .ok_or_else(|| anyhow!("--lm-backend http requires --prompt-t"))?;
    let api_key = std::env::var(API_KEY_VAR).ok();
    Ok(LmProviderConfig::new(endpoint, prompt_r, prompt_t)?
        .with_api_key(api_key)
        .with_max_parallel(method.max_parallel))
}

fn code(args: CodeArgs) -> anyhow::Result<()> {
    let corpus = load(&args.corpus, Role::Source, args.format)?;
    let lexicon = load_lexicon(&args.lexicon)?;
    let docs: Vec<Document> = corpus
        .docs()
        .iter()
        .cloned()
        .map(|mut doc| {
            let coded = code_attributes(&doc, &lexicon);
            let attrs = doc.attributes.get_or_insert_with(BTreeMap::new);
            for (category, value) in coded {
                attrs.insert(category, value);
            }
            doc
        })
        .collect();
    let coded = Corpus::new(corpus.name(), corpus.role(), docs)?;

    let mut guard = OutputGuard::new(&args.out)?;
    let path = guard.save("coded.jsonl", |p| write_corpus(&coded, p))?;
    guard.commit();
    println!(
        "coded {} documents against {} categories -> {}",
        coded.len(),
        lexicon.len(),
        path.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct WeightsSummary<'a> {
    method: WeightMethod,
    n: usize,
    diagnostics: &'a WeightDiagnostics,
    low_effective_sample_size: bool,
    prompt_targeting: Option<PromptTargeting>,
}

fn weights(args: WeightsArgs) -> anyhow::Result<()> {
    let source = load(&args.corpora.source, Role::Source, args.corpora.format)?;
    let target = load(&args.corpora.target, Role::Target, args.corpora.format)?;
    let lexicon = load_optional_lexicon(&args.features)?;
    let (train_r, est_r) = split_corpus(
        &source,
        &SplitSpec::new(args.train_frac, derive_seed(args.seed, "split-source"))?,
    )?;
    let (train_t, _) = split_corpus(
        &target,
        &SplitSpec::new(args.train_frac, derive_seed(args.seed, "split-target"))?,
    )?;

    let (weights, targeting) = match (args.method.method, args.method.lm_backend) {
        (MethodArg::Clf, _) => {
            let spec = feature_spec(&args.features);
            let model = train_ratio_classifier(&train_r, &train_t, &spec, lexicon.as_ref())?;
            (clf_weights(&model, &est_r)?, None)
        }
        (MethodArg::Lm, LmBackendArg::Ngram) => {
            let lm_r = fit_ngram_lm(&train_r, args.method.ngram_order, args.method.ngram_alpha)?;
            let lm_t = fit_ngram_lm(&train_t, args.method.ngram_order, args.method.ngram_alpha)?;
            let weights = lm_weights(&lm_r, &lm_t, &est_r)?;
            let targeting = targeting_from_weights(&weights);
            (weights, Some(targeting))
        }
        (MethodArg::Lm, LmBackendArg::Http) => {
            let config = provider_config(&args.method)?;
            let scorer_r = config.provider(Role::Source);
            let scorer_t = config.provider(Role::Target);
            let weights = lm_weights(&scorer_r, &scorer_t, &est_r)?;
            let targeting = targeting_from_weights(&weights);
            (weights, Some(targeting))
        }
    };
    let weights = match args.truncate_quantile {
        Some(q) => weights.truncated(q)?,
        None => weights,
    };

    let diagnostics = weights.diagnostics();
    let low_ess =
        diagnostics.effective_sample_size < LOW_ESS_FRACTION * weights.len() as f64;
    let summary = WeightsSummary {
        method: weights.method(),
        n: weights.len(),
        diagnostics,
        low_effective_sample_size: low_ess,
        prompt_targeting: targeting.clone(),
    };
    let summary_json = serde_json::to_string_pretty(&summary)? + "\n";

    let mut guard = OutputGuard::new(&args.out)?;
    let csv_path = guard.save("weights.csv", |p| weights.write_csv(p))?;
    guard.write("diagnostics.json", &summary_json)?;
    guard.commit();

    println!(
        "weights for {} documents (method {}, ess {:.1}) -> {}",
        weights.len(),
        weights.method(),
        weights.diagnostics().effective_sample_size,
        csv_path.display()
    );
    if low_ess {
        eprintln!(
            "warning: effective sample size below {:.0}% of n; the target may not be \
             absolutely continuous with respect to the source",
            LOW_ESS_FRACTION * 100.0
        );
    }
    if let Some(t) = &targeting {
        if !t.passed {
            eprintln!(
                "warning: prompt targeting failed (median source/target ratio {:.4} <= 1); \
                 the prompts may not separate the two distributions",
                t.median_ratio
            );
        }
    }
    Ok(())
}

fn estimate(args: EstimateArgs) -> anyhow::Result<()> {
    let corpus = load(&args.source, Role::Source, args.format)?;
    let weights = WeightSet::read_csv(&args.weights)?;

    let by_id: BTreeMap<&str, &Document> = corpus
        .docs()
        .iter()
        .map(|d| (d.id.as_str(), d))
        .collect();
    let docs: Vec<Document> = weights
        .doc_ids()
        .iter()
        .map(|id| {
            by_id
                .get(id.as_str())
                .map(|d| (*d).clone())
                .ok_or_else(|| {
                    anyhow!("weights reference document '{id}' which is not in the corpus")
                })
        })
        .collect::<anyhow::Result<_>>()?;
    let aligned = Corpus::new(corpus.name(), corpus.role(), docs)?;

    let spec = CiSpec {
        alpha: args.alpha,
        bootstrap_b: args.bootstrap,
        seed: args.seed,
    };
    let mut effects: Vec<EffectEstimate> = Vec::new();
    for attribute in &args.attributes {
        effects.push(
            natural_effect(&aligned, &weights, attribute, &spec)
                .with_context(|| format!("estimating the effect of '{attribute}'"))?,
        );
    }

    let mut guard = OutputGuard::new(&args.out)?;
    let path = guard.write(
        "effects.json",
        &(serde_json::to_string_pretty(&effects)? + "\n"),
    )?;
    guard.commit();

    for e in &effects {
        let bootstrap = e
            .bootstrap_ci
            .map(|(lo, hi)| format!("  bootstrap [{lo:.6}, {hi:.6}]"))
            .unwrap_or_default();
        println!(
            "{}: tau {:.6}  normal [{:.6}, {:.6}]{}  (n1={}, n0={})",
            e.attribute, e.tau, e.normal_ci.0, e.normal_ci.1, bootstrap, e.n1, e.n0
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn eval(args: EvalArgs) -> anyhow::Result<()> {
    let source = load(&args.corpora.source, Role::Source, args.corpora.format)?;
    let target = load(&args.corpora.target, Role::Target, args.corpora.format)?;
    let lexicon = load_optional_lexicon(&args.features)?;
    let mut config = EvalConfig::new(feature_spec(&args.features));
    config.train_fraction = args.train_frac;
    config.alpha = args.alpha;
    config.bootstrap_b = args.bootstrap;
    config.truncate_quantile = args.truncate_quantile;
    config.seed = args.seed;
    config.top_k = args.top_k;

    let report = match (args.method.method, args.method.lm_backend) {
        (MethodArg::Clf, _) => evaluate_transport(
            &source,
            &target,
            WeightBackend::Classifier,
            &config,
            lexicon.as_ref(),
        )?,
        (MethodArg::Lm, LmBackendArg::Ngram) => evaluate_transport(
            &source,
            &target,
            WeightBackend::BuiltinLm {
                order: args.method.ngram_order,
                alpha: args.method.ngram_alpha,
            },
            &config,
            lexicon.as_ref(),
        )?,
        (MethodArg::Lm, LmBackendArg::Http) => {
            let provider = provider_config(&args.method)?;
            let scorer_r = provider.provider(Role::Source);
            let scorer_t = provider.provider(Role::Target);
            evaluate_transport(
                &source,
                &target,
                WeightBackend::Provider {
                    source: &scorer_r,
                    target: &scorer_t,
                },
                &config,
                lexicon.as_ref(),
            )?
        }
    };

    let mut guard = OutputGuard::new(&args.out)?;
    let path = guard.write("report.json", &report.to_json())?;
    guard.commit();

    print!("{}", report.summary());
    println!("wrote {}", path.display());
    Ok(())
}

fn synth(args: SynthArgs) -> anyhow::Result<()> {
    let space = match (&args.preset, &args.space) {
        (Some(preset), None) => match preset {
            PresetArg::Twopoint => synth::two_point(),
            PresetArg::Shifted => synth::canonical_shifted(),
            PresetArg::Noshift => synth::canonical_no_shift(),
        },
        (None, Some(path)) => {
            let json = fs::read_to_string(path)
                .with_context(|| format!("cannot read space file {}", path.display()))?;
            SyntheticSpace::from_json(&json)?
        }
        _ => bail!("pass exactly one of --preset or --space"),
    };
    let truth = space.truth()?;

    let mut guard = OutputGuard::new(&args.out)?;
    guard.write("space.json", &space.to_json())?;
    guard.write(
        "truth.json",
        &(serde_json::to_string_pretty(&truth)? + "\n"),
    )?;
    if args.n_source > 0 {
        let corpus =
            space.sample_corpus(Role::Source, args.n_source, derive_seed(args.seed, "synth-source"))?;
        guard.save("source.jsonl", |p| write_corpus(&corpus, p))?;
    }
    if args.n_target > 0 {
        let corpus =
            space.sample_corpus(Role::Target, args.n_target, derive_seed(args.seed, "synth-target"))?;
        guard.save("target.jsonl", |p| write_corpus(&corpus, p))?;
    }
    guard.commit();

    println!(
        "space with {} texts: mu_R {:.6}, mu_T {:.6}, tau_R {:.6}, tau_T {:.6} -> {}",
        space.k(),
        truth.mu_r,
        truth.mu_t,
        truth.tau_r,
        truth.tau_t,
        args.out.display()
    );
    Ok(())
}

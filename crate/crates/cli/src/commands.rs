//! Command implementations. Every command produces a human-readable report
//! and (when an output path is configured) a machine-readable CSV mirror
//! with a fixed schema.

use reinopt::analysis;
use reinopt::simulate;
use reinopt::strategy::{self, OptimalStrategy, ReferenceStrategy};
use reinopt::var_solver::Regime;
use reinopt::{BenchmarkSpec, MarketParams, ProductSpec};

use crate::config::RunConfig;
use crate::fmt::{csv_line, csv_safe, sig6};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Which reference strategy a welfare comparison runs against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Against {
    Dn,
    Cn,
}

/// Human report plus optional CSV mirror.
pub struct CommandOutput {
    pub human: String,
    pub csv: Option<String>,
    /// Number of per-point failures (sweeps only; other commands fail hard).
    pub errors: usize,
}

fn pct(x: f64) -> String {
    format!("{:.2}%", 100.0 * x)
}

fn pct4(x: f64) -> String {
    format!("{:.4}%", 100.0 * x)
}

fn reference(cfg: &RunConfig, against: Against) -> Result<ReferenceStrategy, String> {
    match against {
        Against::Dn => Ok(ReferenceStrategy::DynamicNoReinsurance(
            strategy::solve_dn(&cfg.market, &cfg.product).map_err(|e| e.to_string())?,
        )),
        Against::Cn => Ok(strategy::cn_reference()),
    }
}

fn solve(cfg: &RunConfig) -> Result<OptimalStrategy, String> {
    OptimalStrategy::solve(cfg.market, cfg.product, cfg.benchmark).map_err(|e| e.to_string())
}

fn regime_name(regime: Regime) -> &'static str {
    match regime {
        Regime::NonBinding => "non-binding",
        Regime::Binding => "binding",
        Regime::PortfolioInsurance => "portfolio-insurance",
    }
}

pub fn report(cfg: &RunConfig) -> Result<CommandOutput, String> {
    let s = solve(cfg)?;
    let pos = s.initial_position().map_err(|e| e.to_string())?;
    let verdict = analysis::reinsurance_is_optimal(&cfg.market).map_err(|e| e.to_string())?;
    let utility = s.var.expected_utility();
    let lambda = s.dual.as_vec();
    let pi_hat = s.merton.weights;

    let mut human = String::new();
    human.push_str(&format!(
        "market        r {}  mu ({}, {})  sigma ({}, {})  rho {}\n",
        pct(cfg.market.rate),
        pct(cfg.market.mu1),
        pct(cfg.market.mu2),
        pct(cfg.market.sigma1),
        pct(cfg.market.sigma2),
        pct(cfg.market.rho),
    ));
    human.push_str(&format!(
        "product       v0 {:.2}  T {:.2}y  G {:.2}  epsilon {}  b {:.2}  pi_b {}\n",
        cfg.product.initial_wealth,
        cfg.product.horizon,
        cfg.product.guarantee,
        pct(cfg.product.epsilon),
        cfg.product.crra,
        pct(cfg.benchmark.weight),
    ));
    human.push_str(&format!(
        "dual          lambda* = ({:.4}, {:.4})  gamma_lambda norm {:.4}\n",
        lambda.0,
        lambda.1,
        s.gamma.norm(),
    ));
    human.push_str(&format!(
        "merton        pi_hat = ({:.4}, {:.4})\n",
        pi_hat.0, pi_hat.1
    ));
    human.push_str(&format!(
        "var solution  regime {}  v_f {:.4}  k_eps {:.4}\n",
        regime_name(s.var.regime),
        s.var.v_f,
        s.var.k_eps,
    ));
    human.push_str(&format!(
        "residuals     budget {:.2e}  shortfall {:.2e}\n",
        s.var.diagnostics.budget_residual, s.var.diagnostics.probability_residual,
    ));
    human.push_str(&format!(
        "weights at 0  bond {}  fund {}  put {}\n",
        pct(pos.policy.bond_weight()),
        pct(pos.policy.fund_weight),
        pct(pos.policy.put_weight),
    ));
    human.push_str(&format!(
        "units at 0    bond {:.2}  fund {:.2}  put {:.4}\n",
        pos.units[0], pos.units[1], pos.units[2],
    ));
    human.push_str(&format!("put price     {:.4}\n", pos.put_price));
    human.push_str(&format!(
        "reinsurance optimal: {} (SR2 {:.4} vs rho*SR1 {:.4})\n",
        verdict.optimal,
        verdict.sharpe_reinsurable,
        verdict.rho * verdict.sharpe_fund,
    ));
    human.push_str(&format!("expected utility: {utility:.6e}\n"));

    let mut csv = String::from("key,value\n");
    for (key, value) in [
        ("lambda1", lambda.0),
        ("lambda2", lambda.1),
        ("pi_hat1", pi_hat.0),
        ("pi_hat2", pi_hat.1),
        ("v_f", s.var.v_f),
        ("k_eps", s.var.k_eps),
        ("pi_bar0", pos.policy.bond_weight()),
        ("pi_bar1", pos.policy.fund_weight),
        ("pi_bar2", pos.policy.put_weight),
        ("phi_bond", pos.units[0]),
        ("phi_fund", pos.units[1]),
        ("phi_put", pos.units[2]),
        ("put_price", pos.put_price),
        ("expected_utility", utility),
        (
            "reinsurance_optimal",
            if verdict.optimal { 1.0 } else { 0.0 },
        ),
        ("budget_residual", s.var.diagnostics.budget_residual),
        ("shortfall_residual", s.var.diagnostics.probability_residual),
    ] {
        csv.push_str(&csv_line(&[key.to_string(), sig6(value)]));
    }
    csv.push_str(&csv_line(&[
        "regime".to_string(),
        regime_name(s.var.regime).to_string(),
    ]));
    Ok(CommandOutput {
        human,
        csv: Some(csv),
        errors: 0,
    })
}

pub fn welfare_loss(cfg: &RunConfig, against: Against) -> Result<CommandOutput, String> {
    let reference = reference(cfg, against)?;
    let root = analysis::weul(&reference, &cfg.market, &cfg.product).map_err(|e| e.to_string())?;
    let human = format!(
        "wealth-equivalent utility loss vs {}: {} ({:.2} bp)\nresidual {:.2e} after {} iterations\n",
        reference.label(),
        pct4(root.value),
        10_000.0 * root.value,
        root.residual,
        root.iterations,
    );
    let csv = format!(
        "key,value\nweul_{},{}\nresidual,{}\n",
        reference.label(),
        sig6(root.value),
        sig6(root.residual),
    );
    Ok(CommandOutput {
        human,
        csv: Some(csv),
        errors: 0,
    })
}

pub fn guarantee_gain(cfg: &RunConfig, against: Against) -> Result<CommandOutput, String> {
    let reference = reference(cfg, against)?;
    let root = analysis::geug(&reference, &cfg.market, &cfg.product).map_err(|e| e.to_string())?;
    let annual = analysis::annualized_guarantee_return(root.value, &cfg.product);
    let human = format!(
        "guarantee-equivalent utility gain vs {}: {} (guarantee {:.2}, {} annualized)\nresidual {:.2e} after {} iterations\n",
        reference.label(),
        pct(root.value),
        (1.0 + root.value) * cfg.product.guarantee,
        pct(annual),
        root.residual,
        root.iterations,
    );
    let csv = format!(
        "key,value\ngeug_{},{}\nannualized_guarantee_return,{}\nresidual,{}\n",
        reference.label(),
        sig6(root.value),
        sig6(annual),
        sig6(root.residual),
    );
    Ok(CommandOutput {
        human,
        csv: Some(csv),
        errors: 0,
    })
}

pub fn loss_coverage(cfg: &RunConfig) -> Result<CommandOutput, String> {
    let s = solve(cfg)?;
    let est = simulate::pelc(&s, &cfg.sim).map_err(|e| e.to_string())?;
    let human = format!(
        "puts held: {:.4} (rho-adjusted {:.4})\nPELC0 {} (3-sigma half-width {})\nrho*PELC0 {}\n[{} paths, seed {}]\n",
        est.put_units,
        cfg.market.rho * est.put_units,
        pct(est.pelc),
        pct(est.ci3()),
        pct(est.rho_adjusted),
        cfg.sim.n_paths,
        cfg.sim.seed,
    );
    let mut csv = String::from("key,value\n");
    for (key, value) in [
        ("pelc0", est.pelc),
        ("rho_pelc0", est.rho_adjusted),
        ("phi_put", est.put_units),
        ("numerator", est.numerator),
        ("denominator", est.denominator.mean),
        ("denominator_std_error", est.denominator.std_error()),
        ("ci3", est.ci3()),
    ] {
        csv.push_str(&csv_line(&[key.to_string(), sig6(value)]));
    }
    Ok(CommandOutput {
        human,
        csv: Some(csv),
        errors: 0,
    })
}

pub fn risk_profile(cfg: &RunConfig) -> Result<CommandOutput, String> {
    let s = solve(cfg)?;
    let dn = strategy::solve_dn(&cfg.market, &cfg.product).map_err(|e| e.to_string())?;
    let rows = [
        ("optimal", simulate::profile_optimal(&s)),
        ("dn", simulate::profile_dn(&dn, &cfg.product)),
        (
            "cn",
            simulate::profile_constant_mix(
                reinopt::math::Vec2(0.15, 0.0),
                &cfg.market,
                &cfg.product,
            ),
        ),
    ];
    let mut human =
        String::from("strategy  annualized_return  annualized_std  shortfall_probability\n");
    let mut csv = String::from("strategy,annualized_return,annualized_std,shortfall\n");
    for (name, p) in rows {
        human.push_str(&format!(
            "{name:<9} {:>17} {:>15} {:>21}\n",
            pct(p.annualized_return),
            pct(p.annualized_std),
            pct4(p.shortfall),
        ));
        csv.push_str(&csv_line(&[
            name.to_string(),
            sig6(p.annualized_return),
            sig6(p.annualized_std),
            sig6(p.shortfall),
        ]));
    }
    Ok(CommandOutput {
        human,
        csv: Some(csv),
        errors: 0,
    })
}

/// Sweep axes match the studied model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Crra,
    Epsilon,
    PiB,
    Rate,
    Horizon,
    Guarantee,
}

impl SweepAxis {
    pub fn parse(name: &str) -> Result<Self, String> {
        match name {
            "b" => Ok(SweepAxis::Crra),
            "epsilon" => Ok(SweepAxis::Epsilon),
            "pi-b" | "pi_b" | "pi_B" => Ok(SweepAxis::PiB),
            "r" => Ok(SweepAxis::Rate),
            "T" | "t" => Ok(SweepAxis::Horizon),
            "G" | "g" | "G_T" => Ok(SweepAxis::Guarantee),
            other => Err(format!(
                "unknown sweep axis `{other}` (expected b, epsilon, pi-b, r, T or G)"
            )),
        }
    }

    pub fn column(&self) -> &'static str {
        match self {
            SweepAxis::Crra => "b",
            SweepAxis::Epsilon => "epsilon",
            SweepAxis::PiB => "pi_b",
            SweepAxis::Rate => "r",
            SweepAxis::Horizon => "T",
            SweepAxis::Guarantee => "G",
        }
    }

    /// Default grids of the sensitivity studies: relative-risk-aversion 5 to
    /// 15, shortfall probabilities 0 to 1.5%, benchmark weights anchored at
    /// the no-reinsurance optimum plus/minus 15 points, rates -2% to 2%,
    /// horizons 1 to 20 years and guarantees 70% to 110% of the endowment.
    pub fn default_grid(&self, cfg: &RunConfig) -> Result<Vec<f64>, String> {
        Ok(match self {
            SweepAxis::Crra => [5.0, 7.5, 10.0, 12.5, 15.0]
                .iter()
                .map(|rra| 1.0 - rra)
                .collect(),
            SweepAxis::Epsilon => (0..=15).map(|i| i as f64 * 0.001).collect(),
            SweepAxis::PiB => {
                let anchor = strategy::solve_dn(&cfg.market, &cfg.product)
                    .map_err(|e| e.to_string())?
                    .initial_weight()
                    .map_err(|e| e.to_string())?;
                (-3..=3).map(|i| anchor + i as f64 * 0.05).collect()
            }
            SweepAxis::Rate => vec![-0.02, -0.01, 0.0, 0.01, 0.02],
            SweepAxis::Horizon => vec![1.0, 5.0, 10.0, 15.0, 20.0],
            SweepAxis::Guarantee => (7..=11)
                .map(|i| i as f64 * 0.1 * cfg.product.initial_wealth)
                .collect(),
        })
    }

    fn apply(&self, cfg: &RunConfig, value: f64) -> Result<RunConfig, String> {
        let mut market = (
            cfg.market.rate,
            cfg.market.mu1,
            cfg.market.mu2,
            cfg.market.sigma1,
            cfg.market.sigma2,
            cfg.market.rho,
        );
        let mut product = (
            cfg.product.initial_wealth,
            cfg.product.horizon,
            cfg.product.guarantee,
            cfg.product.epsilon,
            cfg.product.crra,
        );
        let mut pi_b = cfg.benchmark.weight;
        match self {
            SweepAxis::Crra => product.4 = value,
            SweepAxis::Epsilon => product.3 = value,
            SweepAxis::PiB => pi_b = value,
            SweepAxis::Rate => market.0 = value,
            SweepAxis::Horizon => product.1 = value,
            SweepAxis::Guarantee => product.2 = value,
        }
        Ok(RunConfig {
            market: MarketParams::new(market.0, market.1, market.2, market.3, market.4, market.5)
                .map_err(|e| e.to_string())?,
            product: ProductSpec::new(product.0, product.1, product.2, product.3, product.4)
                .map_err(|e| e.to_string())?,
            benchmark: BenchmarkSpec::new(pi_b).map_err(|e| e.to_string())?,
            sim: cfg.sim,
            out: cfg.out.clone(),
        })
    }
}

/// One evaluated grid point; failed fields stay empty and the error column
/// says why.
struct SweepRow {
    axis_value: f64,
    fields: Vec<Option<f64>>,
    error: Vec<String>,
}

/// Sweeps one axis, re-solving everything per grid point from scratch.
/// Points are evaluated in parallel when enabled; rows are always emitted in
/// grid order.
pub fn sweep(
    cfg: &RunConfig,
    axis: SweepAxis,
    grid: Option<Vec<f64>>,
    with_weul: bool,
    with_geug: bool,
) -> Result<CommandOutput, String> {
    let grid = match grid {
        Some(g) if g.is_empty() => return Err("empty sweep grid".to_string()),
        Some(g) => g,
        None => axis.default_grid(cfg)?,
    };

    let mut header: Vec<String> = vec![
        axis.column().to_string(),
        "pi_bar0".into(),
        "pi_bar1".into(),
        "pi_bar2".into(),
        "phi_put".into(),
        "put_price".into(),
        "pelc0".into(),
        "expected_utility".into(),
    ];
    if with_weul {
        header.push("weul_dn".into());
        header.push("weul_cn".into());
    }
    if with_geug {
        header.push("geug_dn".into());
        header.push("geug_cn".into());
    }
    header.push("error".into());

    let evaluate = |&value: &f64| -> SweepRow {
        let mut fields: Vec<Option<f64>> = Vec::with_capacity(header.len() - 2);
        let mut error = Vec::new();
        let point = match axis.apply(cfg, value) {
            Ok(point) => point,
            Err(e) => {
                return SweepRow {
                    axis_value: value,
                    fields: vec![
                        None;
                        if with_weul { 7 } else { 5 } + if with_geug { 2 } else { 0 } + 2
                    ],
                    error: vec![e],
                }
            }
        };
        match solve(&point) {
            Ok(s) => {
                match s.initial_position() {
                    Ok(pos) => {
                        fields.push(Some(pos.policy.bond_weight()));
                        fields.push(Some(pos.policy.fund_weight));
                        fields.push(Some(pos.policy.put_weight));
                        fields.push(Some(pos.units[2]));
                        fields.push(Some(pos.put_price));
                    }
                    Err(e) => {
                        fields.extend([None; 5]);
                        error.push(format!("position: {e}"));
                    }
                }
                match simulate::pelc(&s, &point.sim) {
                    Ok(est) => fields.push(Some(est.pelc)),
                    Err(e) => {
                        fields.push(None);
                        error.push(format!("pelc: {e}"));
                    }
                }
                fields.push(Some(s.var.expected_utility()));
            }
            Err(e) => {
                fields.extend([None; 7]);
                error.push(format!("solve: {e}"));
            }
        }
        let mut welfare = |kind: &str| -> [Option<f64>; 2] {
            let dn = strategy::solve_dn(&point.market, &point.product)
                .map(ReferenceStrategy::DynamicNoReinsurance);
            let mut out = [None, None];
            for (slot, reference) in [
                (0, dn.map_err(|e| e.to_string())),
                (1, Ok(strategy::cn_reference())),
            ] {
                match reference.and_then(|r| {
                    if kind == "weul" {
                        analysis::weul(&r, &point.market, &point.product).map_err(|e| e.to_string())
                    } else {
                        analysis::geug(&r, &point.market, &point.product).map_err(|e| e.to_string())
                    }
                }) {
                    Ok(root) => out[slot] = Some(root.value),
                    Err(e) => error.push(format!("{kind}[{slot}]: {e}")),
                }
            }
            out
        };
        if with_weul {
            let w = welfare("weul");
            fields.extend(w);
        }
        if with_geug {
            let g = welfare("geug");
            fields.extend(g);
        }
        SweepRow {
            axis_value: value,
            fields,
            error,
        }
    };

    #[cfg(feature = "parallel")]
    let rows: Vec<SweepRow> = grid.par_iter().map(evaluate).collect();
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<SweepRow> = grid.iter().map(evaluate).collect();

    let mut csv = csv_line(&header);
    let mut errors = 0usize;
    for row in &rows {
        let mut fields = vec![sig6(row.axis_value)];
        for f in &row.fields {
            fields.push(f.map(sig6).unwrap_or_default());
        }
        fields.push(csv_safe(&row.error.join("; ")));
        if !row.error.is_empty() {
            errors += 1;
        }
        csv.push_str(&csv_line(&fields));
    }
    let human = format!(
        "swept {} over {} points ({} with errors)\n",
        axis.column(),
        rows.len(),
        errors
    );
    Ok(CommandOutput {
        human,
        csv: Some(csv),
        errors,
    })
}

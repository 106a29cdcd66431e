//! Acceptance battery. Runs every criterion in order, prints one PASS/FAIL
//! line each and exits non-zero if any fails. Built with `harness = false`.

#![allow(clippy::needless_range_loop)]

use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use chrono::{Datelike, NaiveDate, Weekday};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use cmom::econometrics::{
    fama_macbeth, hc0_covariance, ols, summary_stats, Covariance, FmStandardErrors,
};
use cmom::factors::build_factor;
use cmom::links::customer_aggregates;
use cmom::panel::{
    Announcement, AnnouncementTable, Exchange, MarketPoint, MarketSeries, ReturnPanel,
    ReturnRecord,
};
use cmom::period::{Frequency, Ordinal, Timeline, TradingCalendar};
use cmom::report::Cell;
use cmom::signals::{
    aggregate_states, cmom_name, compute_car3, compute_nav, compute_sue, customer_momentum_signal,
    window_return, Absent, LagWindow, SignalPanel, REL_SIZE,
};
use cmom::sorter::{
    conditional_double_sort, form_portfolios, value_weights, BreakpointSpec, SortOptions, Weighting,
};
use cmom::study::{run_study, Command, StudyConfig};
use cmom::synth::{generate, DgpConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

// ---------------------------------------------------------------------------
// 1. OLS and Newey-West against explicit matrix formulas

/// Gauss-Jordan inverse with partial pivoting.
fn invert(mut a: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for col in 0..n {
        let p = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, p);
        inv.swap(col, p);
        let d = a[col][col];
        for j in 0..n {
            a[col][j] /= d;
            inv[col][j] /= d;
        }
        for i in 0..n {
            if i != col {
                let f = a[i][col];
                for j in 0..n {
                    a[i][j] -= f * a[col][j];
                    inv[i][j] -= f * inv[col][j];
                }
            }
        }
    }
    inv
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (n, m, p) = (a.len(), b.len(), b[0].len());
    (0..n)
        .map(|i| (0..p).map(|j| (0..m).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

struct OracleFit {
    beta: Vec<f64>,
    se_plain: Vec<f64>,
    se_nw: Vec<Vec<f64>>,
}

fn ols_oracle(y: &[f64], rows: &[Vec<f64>], lags: &[usize]) -> OracleFit {
    let (t, k) = (rows.len(), rows[0].len());
    let xtx: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| rows.iter().map(|r| r[i] * r[j]).sum()).collect())
        .collect();
    let xty: Vec<f64> = (0..k).map(|i| rows.iter().zip(y).map(|(r, v)| r[i] * v).sum()).collect();
    let a = invert(xtx);
    let beta: Vec<f64> = (0..k).map(|i| (0..k).map(|j| a[i][j] * xty[j]).sum()).collect();
    let u: Vec<f64> = rows
        .iter()
        .zip(y)
        .map(|(r, v)| v - r.iter().zip(&beta).map(|(x, b)| x * b).sum::<f64>())
        .collect();
    let s2 = u.iter().map(|e| e * e).sum::<f64>() / (t - k) as f64;
    let se_plain = (0..k).map(|i| (s2 * a[i][i]).sqrt()).collect();
    let se_nw = lags
        .iter()
        .map(|&l| {
            let mut s = vec![vec![0.0; k]; k];
            for lag in 0..=l.min(t - 1) {
                let w = if lag == 0 { 1.0 } else { 1.0 - lag as f64 / (l as f64 + 1.0) };
                for tt in lag..t {
                    for i in 0..k {
                        for j in 0..k {
                            let g = u[tt] * u[tt - lag] * rows[tt][i] * rows[tt - lag][j];
                            if lag == 0 {
                                s[i][j] += g;
                            } else {
                                s[i][j] += w * g;
                                s[j][i] += w * g;
                            }
                        }
                    }
                }
            }
            let v = matmul(&matmul(&a, &s), &a);
            (0..k).map(|i| v[i][i].sqrt()).collect()
        })
        .collect();
    OracleFit { beta, se_plain, se_nw }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let lags = [0usize, 3, 6];
    let mut worst = 0.0f64;
    let mut hc0_exact = true;
    for _ in 0..50 {
        let t = rng.random_range(30..=500);
        let k = rng.random_range(1..=8);
        let rows: Vec<Vec<f64>> = (0..t)
            .map(|_| {
                (0..k)
                    .map(|j| if j == 0 { 1.0 } else { 0.5 * j as f64 + normal(&mut rng) })
                    .collect()
            })
            .collect();
        let mut e_prev = 0.0;
        let y: Vec<f64> = rows
            .iter()
            .map(|r| {
                e_prev = 0.4 * e_prev + normal(&mut rng) * (1.0 + r.last().unwrap().abs());
                r.iter().enumerate().map(|(j, x)| (j as f64 - 2.0) * 0.3 * x).sum::<f64>() + e_prev
            })
            .collect();
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let x = DMatrix::from_row_slice(t, k, &flat);
        let names: Vec<String> = (0..k).map(|j| format!("x{j}")).collect();
        let oracle = ols_oracle(&y, &rows, &lags);

        let plain = ols(&y, &x, &names, Covariance::Plain).unwrap();
        for i in 0..k {
            worst = worst.max(rel_err(plain.coef[i], oracle.beta[i]));
            worst = worst.max(rel_err(plain.se[i], oracle.se_plain[i]));
        }
        for (li, &l) in lags.iter().enumerate() {
            let nw = ols(&y, &x, &names, Covariance::NeweyWest(Some(l))).unwrap();
            for i in 0..k {
                worst = worst.max(rel_err(nw.se[i], oracle.se_nw[li][i]));
            }
            if l == 0 {
                let hc0 = hc0_covariance(&y, &x, &names).unwrap();
                hc0_exact &= (0..k).all(|i| nw.se[i] == hc0[(i, i)].max(0.0).sqrt());
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-8 && hc0_exact && elapsed < Duration::from_secs(10),
        format!("50 problems, max rel err {worst:.2e}, NW(0)==HC0 {hc0_exact}, {elapsed:.2?}"),
    )
}

// ---------------------------------------------------------------------------
// 2. Fama-MacBeth recovers a planted customer-momentum slope

fn cmom_fm(cfg: &DgpConfig) -> (f64, f64, Option<f64>) {
    let m = generate(cfg).unwrap();
    let aggs = customer_aggregates(&m.monthly, &m.links, None);
    let w = LagWindow::new(1, 1).unwrap();
    let signals = customer_momentum_signal(&m.monthly, &aggs, w).unwrap();
    let r = fama_macbeth(&m.monthly, &signals, &[cmom_name(w)], &[], FmStandardErrors::Classic).unwrap();
    let i = r.index_of(&cmom_name(w)).unwrap();
    (r.mean[i], r.se[i].unwrap(), r.t[i])
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let planted = DgpConfig {
        n_firms: 300,
        n_periods: 480,
        beta_cmom: 0.04,
        seed: 2024,
        ..DgpConfig::default()
    };
    let (slope, se, _) = cmom_fm(&planted);
    let recovered = (slope - 0.04).abs() <= 2.0 * se;
    let mut quiet = 0;
    let mut worst_t = 0.0f64;
    for seed in 0..20 {
        let null = DgpConfig {
            beta_cmom: 0.0,
            seed: 7000 + seed,
            ..planted.clone()
        };
        let t = cmom_fm(&null).2.unwrap_or(0.0);
        worst_t = worst_t.max(t.abs());
        if t.abs() < 2.5 {
            quiet += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        recovered && quiet >= 19 && elapsed < Duration::from_secs(120),
        format!(
            "slope {slope:.4} (SE {se:.4}, target 0.04); null |t|<2.5 on {quiet}/20 seeds (max {worst_t:.2}); {elapsed:.2?}"
        ),
    )
}

// ---------------------------------------------------------------------------
// 3. Sorting against sort-and-slice

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let n_sections = 1000;
    let max_firms = 400;
    let firms: Vec<String> = (0..max_firms).map(|i| format!("S{i:04}")).collect();
    let mut records = Vec::new();
    // (stamp, firm index, signal, ret, me)
    let mut sections: Vec<Vec<(usize, f64, f64, f64)>> = Vec::new();
    for s in 0..n_sections {
        let n = rng.random_range(20..=max_firms);
        let stamp = 2 * s as Ordinal + 1;
        let mut cs = Vec::with_capacity(n);
        for f in 0..n {
            let me = (2.0 + normal(&mut rng)).exp();
            let ret = 0.01 + 0.08 * normal(&mut rng);
            let sig = normal(&mut rng);
            records.push(ReturnRecord {
                firm: firms[f].clone(),
                period: stamp - 1,
                ret: 0.0,
                me: Some(me),
                volume: None,
                exchange: Some(Exchange::Nyse),
            });
            records.push(ReturnRecord {
                firm: firms[f].clone(),
                period: stamp,
                ret,
                me: None,
                volume: None,
                exchange: Some(Exchange::Nyse),
            });
            cs.push((f, sig, ret, me));
        }
        sections.push(cs);
    }
    let panel = ReturnPanel::from_records(Timeline::Monthly, records).unwrap();
    let mut signals = SignalPanel::new(&panel);
    for (s, cs) in sections.iter().enumerate() {
        for &(f, sig, _, _) in cs {
            let id = panel.firm_id(&firms[f]).unwrap();
            signals.insert("x", id, 2 * s as Ordinal + 1, sig).unwrap();
        }
    }
    let spec = BreakpointSpec::per_period(10).unwrap();
    let ew = form_portfolios(&panel, &signals, "x", SortOptions::new(spec, Weighting::Equal)).unwrap();
    let vw = form_portfolios(&panel, &signals, "x", SortOptions::new(spec, Weighting::Value)).unwrap();

    let mut mismatches = 0;
    let mut worst_ret = 0.0f64;
    let mut worst_weight_sum = 0.0f64;
    let mut ls = Vec::new();
    for (s, cs) in sections.iter().enumerate() {
        let stamp = 2 * s as Ordinal + 1;
        let n = cs.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| cs[a].1.total_cmp(&cs[b].1));
        // Distinct values: the rank-r member lies above the i/10 threshold
        // exactly when r > floor((n-1) i / 10).
        let cuts: Vec<usize> = (1..10).map(|i| (n - 1) * i / 10).collect();
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); 10];
        for (r, &idx) in order.iter().enumerate() {
            members[cuts.iter().filter(|&&c| c < r).count()].push(idx);
        }
        let (Some(pe), Some(pv)) = (
            ew.periods.iter().find(|p| p.period == stamp),
            vw.periods.iter().find(|p| p.period == stamp),
        ) else {
            mismatches += 1;
            continue;
        };
        for b in 0..10 {
            let m = &members[b];
            if pe.counts[b] != m.len() || pv.counts[b] != m.len() {
                mismatches += 1;
            }
            let ew_oracle = m.iter().map(|&i| cs[i].2).sum::<f64>() / m.len() as f64;
            let me: Vec<f64> = m.iter().map(|&i| cs[i].3).collect();
            let total: f64 = me.iter().sum();
            let vw_oracle = m.iter().map(|&i| cs[i].3 * cs[i].2).sum::<f64>() / total;
            worst_ret = worst_ret.max((pe.returns[b] - ew_oracle).abs()).max((pv.returns[b] - vw_oracle).abs());
            worst_weight_sum = worst_weight_sum.max((value_weights(&me).iter().sum::<f64>() - 1.0).abs());
        }
        ls.push(pe.long_short);
    }
    let st = summary_stats(&ls, Frequency::Monthly, None).unwrap();
    let null_ok = st.mean.abs() <= 2.0 * st.se;
    outcome(
        mismatches == 0 && worst_ret <= 1e-12 && worst_weight_sum <= 1e-12 && null_ok,
        format!(
            "{n_sections} cross-sections, {mismatches} assignment mismatches, max return diff {worst_ret:.1e}, max |sum w - 1| {worst_weight_sum:.1e}; null L/S mean {:.5} vs 2 NW SE {:.5}",
            st.mean,
            2.0 * st.se
        ),
    )
}

// ---------------------------------------------------------------------------
// 4. 2x3 factor construction

struct FactorFirm {
    name: String,
    me: f64,
    signal: f64,
    ret: f64,
}

fn factor_world(firms: &[FactorFirm], me_scale: f64, signal_sign: f64) -> (ReturnPanel, SignalPanel) {
    let mut records = Vec::new();
    for f in firms {
        records.push(ReturnRecord {
            firm: f.name.clone(),
            period: 0,
            ret: 0.0,
            me: Some(f.me * me_scale),
            volume: None,
            exchange: Some(Exchange::Nyse),
        });
        records.push(ReturnRecord {
            firm: f.name.clone(),
            period: 1,
            ret: f.ret,
            me: None,
            volume: None,
            exchange: Some(Exchange::Nyse),
        });
    }
    let panel = ReturnPanel::from_records(Timeline::Monthly, records).unwrap();
    let mut signals = SignalPanel::new(&panel);
    for f in firms {
        signals
            .insert("s", panel.firm_id(&f.name).unwrap(), 1, signal_sign * f.signal)
            .unwrap();
    }
    (panel, signals)
}

fn factor_value(firms: &[FactorFirm], me_scale: f64, sign: f64) -> Option<f64> {
    let (panel, signals) = factor_world(firms, me_scale, sign);
    build_factor(&panel, &signals, "s", "F").unwrap().values.get(&1).copied()
}

fn criterion_4() -> Outcome {
    // Small: A B C, big: D E F. Signal ranks put one firm in each cell.
    let hand = [
        ("A", 1.0, 1.0, 0.0625),
        ("B", 2.0, 3.0, -0.125),
        ("C", 3.0, 5.0, 0.25),
        ("D", 10.0, 2.0, 0.03125),
        ("E", 20.0, 4.0, 0.5),
        ("F", 30.0, 6.0, -0.0078125),
    ];
    let firms: Vec<FactorFirm> = hand
        .iter()
        .map(|&(n, me, s, r)| FactorFirm {
            name: n.into(),
            me,
            signal: s,
            ret: r,
        })
        .collect();
    let (sl, sh, bl, bh) = (0.0625, 0.25, 0.03125, -0.0078125);
    let expected = 0.5 * (sh + bh) - 0.5 * (sl + bl);
    let got = factor_value(&firms, 1.0, 1.0);
    let hand_ok = got == Some(expected);

    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let (mut neg_ok, mut scale_ok, mut trials) = (true, true, 0);
    for _ in 0..200 {
        let n = rng.random_range(12..80);
        let firms: Vec<FactorFirm> = (0..n)
            .map(|i| FactorFirm {
                name: format!("R{i:03}"),
                me: (3.0 + 1.5 * normal(&mut rng)).exp(),
                signal: if i % 7 == 0 { 0.5 } else { normal(&mut rng) },
                ret: 0.01 + 0.1 * normal(&mut rng),
            })
            .collect();
        let Some(base) = factor_value(&firms, 1.0, 1.0) else {
            continue;
        };
        trials += 1;
        let negated = factor_value(&firms, 1.0, -1.0);
        neg_ok &= negated.map(f64::to_bits) == Some((-base).to_bits());
        let doubled = factor_value(&firms, 2.0, 1.0);
        scale_ok &= doubled.map(f64::to_bits) == Some(base.to_bits());
    }
    outcome(
        hand_ok && neg_ok && scale_ok && trials > 100,
        format!(
            "hand example {got:?} vs {expected}; negation bit-exact {neg_ok}, ME doubling invariant {scale_ok} over {trials} worlds"
        ),
    )
}

// ---------------------------------------------------------------------------
// 5. Signal formulas against direct recomputation

fn sheet_sd(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn quarterly(firm: &str, first: NaiveDate, eps: &[f64]) -> Vec<Announcement> {
    eps.iter()
        .enumerate()
        .map(|(i, &e)| Announcement {
            firm: firm.into(),
            date: first + chrono::Days::new(91 * i as u64),
            eps: e,
        })
        .collect()
}

fn sue_fixtures(rng: &mut ChaCha8Rng) -> (f64, bool) {
    let mut worst = 0.0f64;
    let mut rules = true;
    let first = NaiveDate::from_ymd_opt(2001, 2, 10).unwrap();
    let mut rows = Vec::new();
    let mut cases = Vec::new();
    for f in 0..20 {
        let n = rng.random_range(13..=20);
        let mut level = 1.0;
        let eps: Vec<f64> = (0..n)
            .map(|_| {
                level += 0.05 + 0.2 * normal(rng);
                level
            })
            .collect();
        let name = format!("E{f:02}");
        rows.extend(quarterly(&name, first, &eps));
        cases.push((name, eps));
    }
    // Flat year-over-year changes, and a sparse announcer.
    rows.extend(quarterly("FLAT", first, &(0..14).map(|i| 1.0 + 0.25 * (i / 4) as f64 + [0.0, 0.5, 0.25, 0.75][i % 4]).collect::<Vec<_>>()));
    rows.extend(quarterly("FEW", first, &[1.0, 1.1, 1.2, 1.3, 1.4]));
    let table = AnnouncementTable::new(rows).unwrap();
    for (name, eps) in &cases {
        let i = eps.len() - 1;
        let changes: Vec<f64> = (4..=i).map(|j| eps[j] - eps[j - 4]).collect();
        let trailing = &changes[changes.len().saturating_sub(8)..];
        let expected = (eps[i] - eps[i - 4]) / sheet_sd(trailing);
        let got = compute_sue(&table, name, i).unwrap();
        worst = worst.max((got - expected).abs());
    }
    rules &= compute_sue(&table, "FLAT", 13) == Err(Absent::DegenerateDispersion);
    rules &= compute_sue(&table, "FEW", 4) == Err(Absent::InsufficientAnnouncements);
    (worst, rules)
}

struct DailyWorld {
    panel: ReturnPanel,
    market: MarketSeries,
    cal: TradingCalendar,
    returns: BTreeMap<(usize, usize), f64>,
    volumes: BTreeMap<(usize, usize), f64>,
    mkt: Vec<f64>,
}

fn daily_world(rng: &mut ChaCha8Rng, n_firms: usize) -> DailyWorld {
    let cal = TradingCalendar::weekdays(
        NaiveDate::from_ymd_opt(2010, 1, 4).unwrap(),
        NaiveDate::from_ymd_opt(2010, 12, 31).unwrap(),
    );
    let timeline = Timeline::Daily(std::sync::Arc::new(cal.clone()));
    let days = cal.len();
    let mkt: Vec<f64> = (0..days).map(|_| 0.0004 + 0.01 * normal(rng)).collect();
    let mut records = Vec::new();
    let mut returns = BTreeMap::new();
    let mut volumes = BTreeMap::new();
    for f in 0..n_firms {
        for d in 0..days {
            let r = mkt[d] + 0.02 * normal(rng);
            let v = (10.0 + 0.5 * normal(rng)).exp().round();
            returns.insert((f, d), r);
            volumes.insert((f, d), v);
            records.push(ReturnRecord {
                firm: format!("D{f:02}"),
                period: d as Ordinal,
                ret: r,
                me: Some(100.0),
                volume: Some(v),
                exchange: None,
            });
        }
    }
    let panel = ReturnPanel::from_records(timeline.clone(), records).unwrap();
    let points = mkt
        .iter()
        .enumerate()
        .map(|(d, &m)| {
            (
                d as Ordinal,
                MarketPoint {
                    market_return: m,
                    risk_free: 0.0001,
                },
            )
        })
        .collect();
    DailyWorld {
        market: MarketSeries::new(timeline, points),
        panel,
        cal,
        returns,
        volumes,
        mkt,
    }
}

fn car3_and_nav_fixtures(rng: &mut ChaCha8Rng) -> (f64, f64, bool) {
    let w = daily_world(rng, 20);
    let (mut worst_car, mut worst_nav) = (0.0f64, 0.0f64);
    let mut weekend_ok = true;
    for f in 0..20 {
        let firm = format!("D{f:02}");
        let id = w.panel.firm_id(&firm).unwrap();
        let d = rng.random_range(70..w.cal.len() - 2);
        let date = w.cal.date_of(d as Ordinal).unwrap();
        let expected: f64 = (d - 1..=d + 1).map(|x| w.returns[&(f, x)] - w.mkt[x]).sum();
        let got = compute_car3(&w.panel, &w.market, &firm, date).unwrap();
        worst_car = worst_car.max((got - expected).abs());

        // A Saturday announcement counts from the following Monday.
        let mondays: Vec<usize> = (70..w.cal.len() - 2)
            .filter(|&x| w.cal.date_of(x as Ordinal).unwrap().weekday() == Weekday::Mon)
            .collect();
        let mdate = w.cal.date_of(mondays[rng.random_range(0..mondays.len())] as Ordinal).unwrap();
        let saturday = mdate - chrono::Days::new(2);
        let (sat, mon) = (
            compute_car3(&w.panel, &w.market, &firm, saturday),
            compute_car3(&w.panel, &w.market, &firm, mdate),
        );
        weekend_ok &= sat.is_ok() && sat == mon;

        let base: Vec<f64> = (d - 60..=d - 11).map(|x| w.volumes[&(f, x)].ln_1p()).collect();
        let mean = base.iter().sum::<f64>() / base.len() as f64;
        let expected_nav = (w.volumes[&(f, d)].ln_1p() - mean) / sheet_sd(&base);
        let got_nav = compute_nav(&w.panel, id, d as Ordinal).unwrap();
        worst_nav = worst_nav.max((got_nav - expected_nav).abs());
    }
    (worst_car, worst_nav, weekend_ok)
}

fn window_fixtures(rng: &mut ChaCha8Rng) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let len = rng.random_range(13..40);
        let series: Vec<(Ordinal, f64)> = (0..len).map(|p| (p as Ordinal, 0.01 + 0.1 * normal(rng))).collect();
        let k = rng.random_range(1..=3u32);
        let j = rng.random_range(k..=12u32);
        let t = rng.random_range(j as usize..=len) as Ordinal;
        let mut growth = 1.0;
        for p in t - j as Ordinal..=t - k as Ordinal {
            growth *= 1.0 + series[p as usize].1;
        }
        let got = window_return(&series, t, LagWindow::new(j, k).unwrap()).unwrap();
        worst = worst.max((got - (growth - 1.0)).abs());
    }
    worst
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let (sue, rules) = sue_fixtures(&mut rng);
    let (car3, nav, weekend) = car3_and_nav_fixtures(&mut rng);
    let window = window_fixtures(&mut rng);
    let worst = sue.max(car3).max(nav).max(window);
    outcome(
        worst <= 1e-9 && rules && weekend,
        format!(
            "max abs diff SUE {sue:.1e}, CAR3 {car3:.1e}, NAV {nav:.1e}, window {window:.1e}; absent rules {rules}; weekend shift {weekend}"
        ),
    )
}

// ---------------------------------------------------------------------------
// 6. Compounding split identity

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let series: Vec<(Ordinal, f64)> = (0..240)
        .map(|p| (p as Ordinal, (0.005 + 0.09 * normal(&mut rng)).max(-0.9)))
        .collect();
    let window = |a: usize, b: usize| {
        let t = b as Ordinal + 1;
        window_return(&series, t, LagWindow::new((b + 1 - a) as u32, 1).unwrap()).unwrap()
    };
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let a = rng.random_range(0..200);
        let b = rng.random_range(a + 1..(a + 37).min(240));
        let m = rng.random_range(a..b);
        let merged = (1.0 + window(a, m)) * (1.0 + window(m + 1, b)) - 1.0;
        worst = worst.max((merged - window(a, b)).abs());
    }
    outcome(worst <= 1e-12, format!("10000 splits, max abs diff {worst:.1e}"))
}

// ---------------------------------------------------------------------------
// 7. Lead-lag: customer momentum strengthens with relative customer size

fn criterion_7() -> Outcome {
    let cfg = DgpConfig {
        n_firms: 500,
        n_periods: 480,
        beta_cmom: 0.0,
        beta_leadlag: 0.02,
        seed: 77,
        ..DgpConfig::default()
    };
    let m = generate(&cfg).unwrap();
    let aggs = customer_aggregates(&m.monthly, &m.links, None);
    let w = LagWindow::new(1, 1).unwrap();
    let mut signals = customer_momentum_signal(&m.monthly, &aggs, w).unwrap();
    signals.extend(aggregate_states(&m.monthly, &aggs).unwrap().lagged(1)).unwrap();
    let inner = SortOptions::new(BreakpointSpec::per_period(5).unwrap(), Weighting::Equal);
    let ds = conditional_double_sort(&m.monthly, &signals, REL_SIZE, 5, &cmom_name(w), inner).unwrap();
    let means: Vec<f64> = ds
        .by_outer
        .iter()
        .map(|s| {
            let ls: Vec<f64> = s.long_short().into_iter().map(|x| x.1).collect();
            ls.iter().sum::<f64>() / ls.len().max(1) as f64
        })
        .collect();
    let rising = means.windows(2).filter(|p| p[1] >= p[0]).count();
    let shown: Vec<String> = means.iter().map(|x| format!("{:.2}", x * 100.0)).collect();
    outcome(
        means.len() == 5 && rising >= 4,
        format!(
            "L/S means by relative-size quintile (%): [{}]; {rising} of {} adjacent steps nondecreasing",
            shown.join(", "),
            means.len().saturating_sub(1)
        ),
    )
}

// ---------------------------------------------------------------------------
// 8. Sharpe ratio display

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let raw: Vec<f64> = (0..480).map(|_| normal(&mut rng)).collect();
    let m = raw.iter().sum::<f64>() / raw.len() as f64;
    let sd = sheet_sd(&raw);
    let series: Vec<f64> = raw.iter().map(|x| 0.0106 + 0.0695 * (x - m) / sd).collect();
    let st = summary_stats(&series, Frequency::Monthly, None).unwrap();
    let shown = Cell::num(st.sharpe, 2).display();
    outcome(
        shown == "0.54",
        format!(
            "mean {:.4}%, SD {:.4}% monthly -> annualized Sharpe {:.4}, displayed {shown} (target 0.54)",
            st.mean * 100.0,
            st.sd * 100.0,
            st.sharpe.unwrap_or(f64::NAN)
        ),
    )
}

// ---------------------------------------------------------------------------
// 9 and 10. Full pipeline

fn pipeline(root: &Path, threads: Option<usize>) -> (Duration, Vec<cmom::report::Report>) {
    let cfg = StudyConfig {
        data_dir: root.join("data"),
        out_dir: root.join("out"),
        threads,
        ..StudyConfig::default()
    };
    let start = Instant::now();
    run_study(&cfg, Command::Synth).unwrap();
    let out = run_study(&cfg, Command::All).unwrap();
    (start.elapsed(), out.reports)
}

fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for sub in ["data", "out"] {
        for e in std::fs::read_dir(root.join(sub)).unwrap() {
            let p = e.unwrap().path();
            files.insert(format!("{sub}/{}", p.file_name().unwrap().to_string_lossy()), std::fs::read(&p).unwrap());
        }
    }
    files
}

fn criteria_9_and_10() -> (Outcome, Outcome) {
    let runs: Vec<(tempfile::TempDir, Option<usize>)> = [Some(1), Some(1), Some(4)]
        .into_iter()
        .map(|t| (tempfile::tempdir().unwrap(), t))
        .collect();
    let mut timings = Vec::new();
    let mut reports = Vec::new();
    for (dir, threads) in &runs {
        let (elapsed, r) = pipeline(dir.path(), *threads);
        timings.push(elapsed);
        reports.push(r);
    }
    let snaps: Vec<_> = runs.iter().map(|(d, _)| snapshot(d.path())).collect();
    let differing: Vec<&String> = snaps[0]
        .iter()
        .filter(|(k, v)| snaps[1..].iter().any(|s| s.get(*k) != Some(*v)))
        .map(|(k, _)| k)
        .collect();
    let same_sets = snaps.iter().all(|s| s.keys().eq(snaps[0].keys()));
    let determinism = outcome(
        same_sets && differing.is_empty(),
        format!(
            "{} files compared across 3 runs (threads 1, 1, 4); {} differ",
            snaps[0].len(),
            differing.len()
        ),
    );

    let out = runs[0].0.path().join("out");
    let mut missing = Vec::new();
    for c in Command::ANALYSES {
        for ext in ["md", "json"] {
            if !out.join(format!("{c}.{ext}")).is_file() {
                missing.push(format!("{c}.{ext}"));
            }
        }
        match reports[0].iter().find(|r| r.command == c.as_str()) {
            None => missing.push(c.to_string()),
            Some(r) => {
                for t in &r.tables {
                    let filled = t.rows.iter().any(|row| row.cells.iter().any(|x| *x != Cell::Empty));
                    if !filled {
                        missing.push(format!("{c}/{}", t.id));
                    }
                }
            }
        }
    }
    let n_tables: usize = reports[0].iter().map(|r| r.tables.len()).sum();
    let smoke = outcome(
        timings[0] < Duration::from_secs(60) && missing.is_empty(),
        format!(
            "synth + all on 100 firms x 120 months in {:.2?}; {} reports, {n_tables} tables; empty or missing: [{}]",
            timings[0],
            reports[0].len(),
            missing.join(", ")
        ),
    );
    (determinism, smoke)
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, o: Outcome| {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {n:>2} {tag} {name}: {}", o.detail);
        if !o.pass {
            failed += 1;
        }
    };
    report(1, "econometrics oracle", criterion_1());
    report(2, "Fama-MacBeth recovery", criterion_2());
    report(3, "sort engine", criterion_3());
    report(4, "factor construction", criterion_4());
    report(5, "signal formulas", criterion_5());
    report(6, "compounding identity", criterion_6());
    report(7, "lead-lag pattern", criterion_7());
    report(8, "Sharpe display", criterion_8());
    let (det, smoke) = criteria_9_and_10();
    report(9, "determinism", det);
    report(10, "end-to-end smoke", smoke);
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

use serde::{Deserialize, Serialize};

use super::{CallQuote, MarketError, OptionQuote};
use crate::pricing::OptionKind;

pub const MIN_QUOTES: usize = 8;

/// Call-equivalent price of a put on a futures contract via parity.
pub fn put_to_call(put_mid: f64, f: f64, k: f64, r: f64, tau: f64) -> Result<f64, MarketError> {
    let c = put_mid + (-r * tau).exp() * (f - k);
    if c < 0.0 {
        return Err(MarketError::NegativeCall { strike: k, value: c });
    }
    Ok(c)
}

fn decrease_violated(m0: f64, m1: f64) -> bool {
    m1 >= m0
}

fn convexity_violated(k: [f64; 3], m: [f64; 3]) -> bool {
    let left = (m[1] - m[0]) / (k[1] - k[0]);
    let right = (m[2] - m[1]) / (k[2] - k[1]);
    let scale = left.abs().max(right.abs()).max(1e-300);
    right < left - 1e-12 * scale
}

/// Number of strict-decrease violations over consecutive pairs plus
/// convexity violations over consecutive triples.
pub fn shape_violations(strikes: &[f64], mids: &[f64]) -> usize {
    let pairs = mids.windows(2).filter(|w| decrease_violated(w[0], w[1])).count();
    let triples = (2..mids.len())
        .filter(|&i| {
            convexity_violated([strikes[i - 2], strikes[i - 1], strikes[i]], [mids[i - 2], mids[i - 1], mids[i]])
        })
        .count();
    pairs + triples
}

fn involved(strikes: &[f64], mids: &[f64]) -> Vec<bool> {
    let mut flags = vec![false; mids.len()];
    for i in 1..mids.len() {
        if decrease_violated(mids[i - 1], mids[i]) {
            flags[i - 1] = true;
            flags[i] = true;
        }
    }
    for i in 2..mids.len() {
        if convexity_violated([strikes[i - 2], strikes[i - 1], strikes[i]], [mids[i - 2], mids[i - 1], mids[i]]) {
            flags[i - 2] = true;
            flags[i - 1] = true;
            flags[i] = true;
        }
    }
    flags
}

/// Indices of the quotes kept after repeatedly deleting the quote whose
/// removal leaves the fewest violations. Ties go to the quote farthest from
/// the money, then to the higher strike. Strikes must be increasing.
pub fn enforce_shape(strikes: &[f64], mids: &[f64], futures: f64) -> Vec<usize> {
    let mut kept: Vec<usize> = (0..strikes.len()).collect();
    loop {
        let ks: Vec<f64> = kept.iter().map(|&i| strikes[i]).collect();
        let ms: Vec<f64> = kept.iter().map(|&i| mids[i]).collect();
        if shape_violations(&ks, &ms) == 0 {
            return kept;
        }
        let flags = involved(&ks, &ms);
        let mut best: Option<(usize, usize, f64)> = None;
        for pos in (0..kept.len()).filter(|&p| flags[p]) {
            let ks2: Vec<f64> = ks.iter().enumerate().filter(|(j, _)| *j != pos).map(|(_, v)| *v).collect();
            let ms2: Vec<f64> = ms.iter().enumerate().filter(|(j, _)| *j != pos).map(|(_, v)| *v).collect();
            let remaining = shape_violations(&ks2, &ms2);
            let distance = (ks[pos] / futures).ln().abs();
            let better = match best {
                None => true,
                Some((_, r, d)) => remaining < r || (remaining == r && distance >= d),
            };
            if better {
                best = Some((pos, remaining, distance));
            }
        }
        let (pos, _, _) = best.expect("a violation always involves some quote");
        kept.remove(pos);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DropReason {
    /// Missing or crossed bid/ask, or a non-positive mid.
    Inadmissible,
    /// In-the-money contract (ITM calls and ITM puts are not used).
    InTheMoney,
    NegativeParity,
    DuplicateStrike,
    Shape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterOutcome {
    pub kept: Vec<CallQuote>,
    pub dropped: Vec<(f64, OptionKind, DropReason)>,
}

/// Build the call-equivalent cross-section: OTM and ATM calls are kept, OTM
/// puts are converted by parity, then quotes breaking the decreasing and
/// convex shape in strike are removed until none remain.
pub fn filter_cross_section(raw: &[OptionQuote], futures: f64, r: f64, tau: f64) -> Result<FilterOutcome, MarketError> {
    let mut dropped = Vec::new();
    let mut candidates: Vec<CallQuote> = Vec::new();
    for q in raw {
        if !q.is_admissible() {
            dropped.push((q.strike, q.kind, DropReason::Inadmissible));
            continue;
        }
        let mid = match q.kind {
            OptionKind::Call if q.strike >= futures => q.mid(),
            OptionKind::Put if q.strike < futures => match put_to_call(q.mid(), futures, q.strike, r, tau) {
                Ok(c) if c > 0.0 => c,
                _ => {
                    dropped.push((q.strike, q.kind, DropReason::NegativeParity));
                    continue;
                }
            },
            _ => {
                dropped.push((q.strike, q.kind, DropReason::InTheMoney));
                continue;
            }
        };
        candidates.push(CallQuote { strike: q.strike, mid, source: q.kind });
    }
    candidates.sort_by(|a, b| a.strike.total_cmp(&b.strike));
    let mut unique: Vec<CallQuote> = Vec::with_capacity(candidates.len());
    for c in candidates {
        if unique.last().is_some_and(|u| u.strike == c.strike) {
            dropped.push((c.strike, c.source, DropReason::DuplicateStrike));
        } else {
            unique.push(c);
        }
    }
    let strikes: Vec<f64> = unique.iter().map(|q| q.strike).collect();
    let mids: Vec<f64> = unique.iter().map(|q| q.mid).collect();
    let keep = enforce_shape(&strikes, &mids, futures);
    let mut kept = Vec::with_capacity(keep.len());
    let mut next = keep.iter().peekable();
    for (i, q) in unique.into_iter().enumerate() {
        if next.peek() == Some(&&i) {
            next.next();
            kept.push(q);
        } else {
            dropped.push((q.strike, q.source, DropReason::Shape));
        }
    }
    if kept.len() < MIN_QUOTES {
        return Err(MarketError::InsufficientQuotes { survivors: kept.len(), required: MIN_QUOTES });
    }
    Ok(FilterOutcome { kept, dropped })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Moneyness {
    DeepOtmPut,
    OtmPut,
    NearTheMoney,
    OtmCall,
    DeepOtmCall,
}

impl Moneyness {
    pub const ALL: [Moneyness; 5] =
        [Moneyness::DeepOtmPut, Moneyness::OtmPut, Moneyness::NearTheMoney, Moneyness::OtmCall, Moneyness::DeepOtmCall];

    pub fn label(self) -> &'static str {
        match self {
            Moneyness::DeepOtmPut => "Deep OTM put",
            Moneyness::OtmPut => "OTM put",
            Moneyness::NearTheMoney => "Near the money",
            Moneyness::OtmCall => "OTM call",
            Moneyness::DeepOtmCall => "Deep OTM call",
        }
    }

    pub fn range(self) -> &'static str {
        match self {
            Moneyness::DeepOtmPut => ">1.10",
            Moneyness::OtmPut => "1.03-1.10",
            Moneyness::NearTheMoney => "0.97-1.03",
            Moneyness::OtmCall => "0.90-0.97",
            Moneyness::DeepOtmCall => "<0.90",
        }
    }
}

/// Bucket by F/K; exact boundary values go to the inner bucket.
pub fn moneyness_bucket(f: f64, k: f64) -> Moneyness {
    let m = f / k;
    if m > 1.10 {
        Moneyness::DeepOtmPut
    } else if m > 1.03 {
        Moneyness::OtmPut
    } else if m >= 0.97 {
        Moneyness::NearTheMoney
    } else if m >= 0.90 {
        Moneyness::OtmCall
    } else {
        Moneyness::DeepOtmCall
    }
}

/// Dataset summary: counts by contract kind per date and by moneyness.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MoneynessTable {
    pub calls_per_date: Vec<usize>,
    pub puts_per_date: Vec<usize>,
    pub buckets: [usize; 5],
}

impl MoneynessTable {
    pub fn add_cross_section(&mut self, futures: f64, quotes: &[CallQuote]) {
        let calls = quotes.iter().filter(|q| q.source == OptionKind::Call).count();
        self.calls_per_date.push(calls);
        self.puts_per_date.push(quotes.len() - calls);
        for q in quotes {
            self.buckets[moneyness_bucket(futures, q.strike) as usize] += 1;
        }
    }

    pub fn total(&self) -> usize {
        self.calls_per_date.iter().sum::<usize>() + self.puts_per_date.iter().sum::<usize>()
    }

    /// CSV rows: kind summaries then moneyness buckets.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<(), MarketError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["group", "label", "range", "total", "average_per_day", "max_per_day", "min_per_day", "percent"])?;
        let overall: Vec<usize> =
            self.calls_per_date.iter().zip(&self.puts_per_date).map(|(c, p)| c + p).collect();
        for (label, counts) in [("Calls", &self.calls_per_date), ("Puts", &self.puts_per_date), ("Overall", &overall)] {
            let total: usize = counts.iter().sum();
            let avg = if counts.is_empty() { 0.0 } else { total as f64 / counts.len() as f64 };
            let max = counts.iter().max().copied().unwrap_or(0);
            let min = counts.iter().min().copied().unwrap_or(0);
            w.write_record([
                "type".to_string(),
                label.to_string(),
                String::new(),
                total.to_string(),
                format!("{avg:.2}"),
                max.to_string(),
                min.to_string(),
                String::new(),
            ])?;
        }
        let total = self.total().max(1) as f64;
        for b in Moneyness::ALL {
            let n = self.buckets[b as usize];
            w.write_record([
                "moneyness".to_string(),
                b.label().to_string(),
                b.range().to_string(),
                n.to_string(),
                String::new(),
                String::new(),
                String::new(),
                format!("{:.2}", 100.0 * n as f64 / total),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn parity_examples() {
        assert_abs_diff_eq!(put_to_call(5.0, 105.0, 100.0, 0.0, 0.3).unwrap(), 10.0, epsilon = 1e-12);
        assert_eq!(put_to_call(3.25, 100.0, 100.0, 0.05, 0.1).unwrap(), 3.25);
        match put_to_call(0.5, 90.0, 100.0, 0.02, 28.0 / 360.0).unwrap_err() {
            MarketError::NegativeCall { value, .. } => assert_abs_diff_eq!(value, -9.484, epsilon = 1e-3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn shape_examples() {
        let k = [90.0, 100.0, 110.0];
        assert_eq!(shape_violations(&k, &[12.0, 11.0, 10.5]), 0);
        assert_eq!(enforce_shape(&k, &[12.0, 11.0, 10.5], 100.0), vec![0, 1, 2]);
        // 100 and 110 both repair the increase; 110 is farther from the money
        assert_eq!(enforce_shape(&k, &[12.0, 9.0, 10.0], 100.0), vec![0, 1]);
    }

    fn call_chain(mids: &[f64]) -> Vec<OptionQuote> {
        mids.iter()
            .enumerate()
            .map(|(i, m)| OptionQuote { strike: 100.0 + 10.0 * i as f64, kind: OptionKind::Call, bid: m - 0.1, ask: m + 0.1 })
            .collect()
    }

    #[test]
    fn too_few_survivors() {
        let mids = [20.0, 15.0, 11.0, 8.0, 6.0, 4.5, 3.5];
        let err = filter_cross_section(&call_chain(&mids), 100.0, 0.0, 0.1).unwrap_err();
        assert!(matches!(err, MarketError::InsufficientQuotes { survivors: 7, required: 8 }));
        let mids8 = [20.0, 15.0, 11.0, 8.0, 6.0, 4.5, 3.5, 2.8];
        assert_eq!(filter_cross_section(&call_chain(&mids8), 100.0, 0.0, 0.1).unwrap().kept.len(), 8);
    }

    #[test]
    fn puts_converted_itm_dropped() {
        let mut raw = call_chain(&[20.0, 15.0, 11.0, 8.0, 6.0, 4.5, 3.5, 2.8]);
        raw.push(OptionQuote { strike: 90.0, kind: OptionKind::Put, bid: 14.9, ask: 15.1 });
        raw.push(OptionQuote { strike: 90.0, kind: OptionKind::Call, bid: 25.0, ask: 26.0 });
        raw.push(OptionQuote { strike: 80.0, kind: OptionKind::Put, bid: 1.0, ask: 0.5 });
        let out = filter_cross_section(&raw, 100.0, 0.0, 0.1).unwrap();
        assert_eq!(out.kept[0].strike, 90.0);
        assert_eq!(out.kept[0].source, OptionKind::Put);
        assert_abs_diff_eq!(out.kept[0].mid, 25.0, epsilon = 1e-12);
        assert_eq!(out.kept.len(), 9);
        let ks: Vec<f64> = out.kept.iter().map(|q| q.strike).collect();
        let ms: Vec<f64> = out.kept.iter().map(|q| q.mid).collect();
        assert_eq!(shape_violations(&ks, &ms), 0);
        assert!(out.dropped.iter().any(|d| d.2 == DropReason::InTheMoney));
        assert!(out.dropped.iter().any(|d| d.2 == DropReason::Inadmissible));
    }

    #[test]
    fn inconsistent_put_is_the_one_removed() {
        // a converted put at 15 below a call at 20 breaks monotonicity; dropping
        // the put repairs everything, dropping the call would not
        let mut raw = call_chain(&[20.0, 15.0, 11.0, 8.0, 6.0, 4.5, 3.5, 2.8]);
        raw.push(OptionQuote { strike: 90.0, kind: OptionKind::Put, bid: 4.9, ask: 5.1 });
        let out = filter_cross_section(&raw, 100.0, 0.0, 0.1).unwrap();
        assert_eq!(out.kept[0].strike, 100.0);
        assert_eq!(out.dropped, vec![(90.0, OptionKind::Put, DropReason::Shape)]);
    }

    #[test]
    fn bucket_boundaries() {
        assert_eq!(moneyness_bucket(115.0, 100.0), Moneyness::DeepOtmPut);
        assert_eq!(moneyness_bucket(100.0, 100.0), Moneyness::NearTheMoney);
        assert_eq!(moneyness_bucket(85.0, 100.0), Moneyness::DeepOtmCall);
        assert_eq!(moneyness_bucket(110.0, 100.0), Moneyness::OtmPut);
        assert_eq!(moneyness_bucket(103.0, 100.0), Moneyness::NearTheMoney);
        assert_eq!(moneyness_bucket(97.0, 100.0), Moneyness::NearTheMoney);
        assert_eq!(moneyness_bucket(90.0, 100.0), Moneyness::OtmCall);
    }

    proptest! {
        #[test]
        fn parity_inverts(p in 0.01f64..500.0, f in 50.0f64..200.0, k in 50.0f64..200.0, r in -0.01f64..0.1, tau in 0.01f64..1.0) {
            if let Ok(c) = put_to_call(p, f, k, r, tau) {
                let back = c - (-r * tau).exp() * (f - k);
                prop_assert!((back - p).abs() <= 1e-12 * p.max(c));
            }
        }

        #[test]
        fn filtered_sections_are_decreasing_and_convex(noise in proptest::collection::vec(-0.6f64..0.6, 20), f in 95.0f64..105.0) {
            let raw: Vec<OptionQuote> = noise.iter().enumerate().map(|(i, e)| {
                let k = 80.0 + 2.0 * i as f64;
                let intrinsic = (f - k).max(0.0);
                let m = (intrinsic + 6.0 * (-(k - f).powi(2) / 200.0).exp() + e).max(0.05);
                OptionQuote { strike: k, kind: OptionKind::Call, bid: m, ask: m }
            }).collect();
            let ks: Vec<f64> = raw.iter().map(|q| q.strike).collect();
            let ms: Vec<f64> = raw.iter().map(|q| q.mid()).collect();
            let keep = enforce_shape(&ks, &ms, f);
            let k2: Vec<f64> = keep.iter().map(|&i| ks[i]).collect();
            let m2: Vec<f64> = keep.iter().map(|&i| ms[i]).collect();
            for w in m2.windows(2) {
                prop_assert!(w[1] < w[0]);
            }
            for i in 2..m2.len() {
                let left = (m2[i - 1] - m2[i - 2]) / (k2[i - 1] - k2[i - 2]);
                let right = (m2[i] - m2[i - 1]) / (k2[i] - k2[i - 1]);
                prop_assert!(right >= left - 1e-12 * left.abs().max(right.abs()));
            }
        }

        #[test]
        fn bucket_counts_sum(strikes in proptest::collection::vec(50.0f64..200.0, 1..60), f in 80.0f64..120.0) {
            let quotes: Vec<CallQuote> = strikes.iter().map(|&k| CallQuote { strike: k, mid: 1.0, source: OptionKind::Call }).collect();
            let mut t = MoneynessTable::default();
            t.add_cross_section(f, &quotes);
            prop_assert_eq!(t.buckets.iter().sum::<usize>(), quotes.len());
            prop_assert_eq!(t.total(), quotes.len());
        }
    }
}

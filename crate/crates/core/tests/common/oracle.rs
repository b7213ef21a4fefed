//! Reference implementations that share no code with the library: a plain
//! SHA-256, a canonical JSON writer, a full-matrix edit distance, brute-force
//! ranks, and a metric recomputation that reads only exported JSONL.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::Value;

const K: [u32; 64] = [
    0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4, 0xab1c5ed5,
    0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe, 0x9bdc06a7, 0xc19bf174,
    0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc, 0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da,
    0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7, 0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967,
    0x27b70a85, 0x2e1b2138, 0x4d2c6dfc, 0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85,
    0xa2bfe8a1, 0xa81a664b, 0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070,
    0x19a4c116, 0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f, 0x682e6ff3,
    0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7, 0xc67178f2,
];

pub fn sha256_hex(message: &[u8]) -> String {
    let mut h: [u32; 8] = [
        0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a, 0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19,
    ];
    let mut data = message.to_vec();
    let bit_len = (message.len() as u64).wrapping_mul(8);
    data.push(0x80);
    while data.len() % 64 != 56 {
        data.push(0);
    }
    data.extend_from_slice(&bit_len.to_be_bytes());
    for block in data.chunks(64) {
        let mut w = [0u32; 64];
        for i in 0..16 {
            w[i] = u32::from_be_bytes([block[4 * i], block[4 * i + 1], block[4 * i + 2], block[4 * i + 3]]);
        }
        for i in 16..64 {
            let s0 = w[i - 15].rotate_right(7) ^ w[i - 15].rotate_right(18) ^ (w[i - 15] >> 3);
            let s1 = w[i - 2].rotate_right(17) ^ w[i - 2].rotate_right(19) ^ (w[i - 2] >> 10);
            w[i] = w[i - 16].wrapping_add(s0).wrapping_add(w[i - 7]).wrapping_add(s1);
        }
        let [mut a, mut b, mut c, mut d, mut e, mut f, mut g, mut hh] = h;
        for i in 0..64 {
            let s1 = e.rotate_right(6) ^ e.rotate_right(11) ^ e.rotate_right(25);
            let ch = (e & f) ^ (!e & g);
            let t1 = hh.wrapping_add(s1).wrapping_add(ch).wrapping_add(K[i]).wrapping_add(w[i]);
            let s0 = a.rotate_right(2) ^ a.rotate_right(13) ^ a.rotate_right(22);
            let maj = (a & b) ^ (a & c) ^ (b & c);
            let t2 = s0.wrapping_add(maj);
            hh = g;
            g = f;
            f = e;
            e = d.wrapping_add(t1);
            d = c;
            c = b;
            b = a;
            a = t1.wrapping_add(t2);
        }
        for (slot, v) in h.iter_mut().zip([a, b, c, d, e, f, g, hh]) {
            *slot = slot.wrapping_add(v);
        }
    }
    h.iter().map(|x| format!("{x:08x}")).collect()
}

fn write_string(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\u{8}' => out.push_str("\\b"),
            '\u{c}' => out.push_str("\\f"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
}

pub fn canonical(value: &Value) -> String {
    let mut out = String::new();
    write(&mut out, value);
    out
}

fn write(out: &mut String, value: &Value) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            assert!(n.is_i64() || n.is_u64(), "oracle refuses non-integers: {n}");
            out.push_str(&n.to_string());
        }
        Value::String(s) => write_string(out, s),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write(out, item);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let sorted: BTreeMap<&[u8], (&String, &Value)> =
                map.iter().map(|(k, v)| (k.as_bytes(), (k, v))).collect();
            out.push('{');
            for (i, (key, item)) in sorted.values().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_string(out, key);
                out.push(':');
                write(out, item);
            }
            out.push('}');
        }
    }
}

/// Hash an exported event the way the chain rule describes it.
pub fn event_hash(event: &Value) -> String {
    let mut fields = event.as_object().expect("event is an object").clone();
    fields.remove("hash");
    let prev = fields["prev_hash"].as_str().expect("prev_hash").to_string();
    let mut bytes = prev.into_bytes();
    bytes.extend_from_slice(canonical(&Value::Object(fields)).as_bytes());
    sha256_hex(&bytes)
}

pub fn parse_jsonl(bytes: &[u8]) -> Vec<Value> {
    std::str::from_utf8(bytes)
        .unwrap()
        .lines()
        .map(|line| serde_json::from_str(line).unwrap())
        .collect()
}

/// ASCII-only tokenizer; the fixtures and random traces stay in ASCII.
pub fn tokens(text: &str) -> Vec<String> {
    assert!(text.is_ascii(), "oracle tokenizer is ASCII-only: {text:?}");
    text.split(|c: char| c.is_ascii_whitespace() || c.is_ascii_punctuation())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_ascii_lowercase())
        .collect()
}

/// Full-matrix Levenshtein.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut m = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in m.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        m[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = m[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            m[i][j] = sub.min(m[i - 1][j] + 1).min(m[i][j - 1] + 1);
        }
    }
    m[a.len()][b.len()]
}

/// Rank = 1 + (number strictly smaller) + (ties - 1) / 2.
pub fn ranks(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|x| {
            let below = xs.iter().filter(|y| *y < x).count() as f64;
            let equal = xs.iter().filter(|y| *y == x).count() as f64;
            1.0 + below + (equal - 1.0) / 2.0
        })
        .collect()
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}

pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    pearson(&ranks(xs), &ranks(ys))
}

/// Metric values recomputed from exported events.
#[derive(Debug, PartialEq)]
pub struct OracleMetrics {
    pub reflection_depth: u32,
    /// Numerator and denominator, kept exact.
    pub correction: (u32, u32),
    pub distances: Vec<(usize, usize)>,
    pub falsification_events: u32,
    pub branch_count: u32,
    pub uncertainty_tag_count: u32,
    pub engagement: u32,
}

impl OracleMetrics {
    pub fn correction_ratio(&self) -> f64 {
        f64::from(self.correction.0) / f64::from(self.correction.1)
    }

    pub fn s2(&self) -> f64 {
        f64::from(self.engagement) / f64::from(self.engagement + 4)
    }

    fn values(&self) -> Vec<f64> {
        self.distances
            .iter()
            .map(|&(e, n)| if n == 0 { 0.0 } else { e as f64 / n as f64 })
            .collect()
    }

    pub fn mean_distance(&self) -> f64 {
        let v = self.values();
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    }

    pub fn max_distance(&self) -> f64 {
        self.values().into_iter().fold(0.0, f64::max)
    }
}

/// "0.2000" → 2000.
fn ten_thousandths(text: &str) -> u64 {
    let (whole, frac) = text.split_once('.').expect("four-digit decimal");
    assert_eq!(frac.len(), 4);
    whole.parse::<u64>().unwrap() * 10_000 + frac.parse::<u64>().unwrap()
}

pub fn recompute(events: &[Value]) -> OracleMetrics {
    let theta = ten_thousandths(events[0]["payload"]["theta"].as_str().expect("theta in header"));
    // d = edits / len >= theta / 10000, cross-multiplied; an empty pair has d = 0.
    let qualifies = |(edits, len): (usize, usize)| edits as u64 * 10_000 >= theta * len as u64;

    let mut drafts: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut articulations: Vec<(u64, String)> = Vec::new();
    let mut revises: Vec<(u64, String, (usize, usize))> = Vec::new();
    let mut depth = 0;
    let mut challenges = 0;
    let mut tags = 0;
    for event in events {
        let seq = event["seq"].as_u64().unwrap();
        let payload = &event["payload"];
        let branch = payload["branch"].as_str().unwrap_or_default().to_string();
        match payload["kind"].as_str().unwrap() {
            "abstraction" => {
                drafts.insert(branch, tokens(payload["draft_text"].as_str().unwrap()));
            }
            "articulation" => articulations.push((seq, branch)),
            "reflection" => {
                let action = &payload["action"];
                let kind = action["type"].as_str().unwrap();
                if kind != "accept" {
                    depth += 1;
                }
                match kind {
                    "challenge" => {
                        if !action["counter_evidence"].as_str().unwrap().trim().is_empty() {
                            challenges += 1;
                        }
                    }
                    "tag_uncertainty" => tags += 1,
                    "revise" => {
                        let new = tokens(action["new_draft"].as_str().unwrap());
                        let old = drafts.get(&branch).cloned().unwrap_or_default();
                        let d = (levenshtein(&old, &new), old.len().max(new.len()));
                        revises.push((seq, branch.clone(), d));
                        drafts.insert(branch, new);
                    }
                    "branch" => {
                        let opened = payload["new_branch"].as_str().unwrap().to_string();
                        drafts.insert(opened, tokens(action["alternative_draft"].as_str().unwrap()));
                    }
                    _ => {}
                }
            }
            _ => {}
        }
    }
    let qualifying = revises.iter().filter(|r| qualifies(r.2)).count() as u32;
    let corrected = articulations
        .iter()
        .filter(|(seq, branch)| {
            revises
                .iter()
                .find(|(rs, rb, _)| rs > seq && rb == branch)
                .is_some_and(|r| qualifies(r.2))
        })
        .count() as u32;
    let branch_count = articulations.iter().map(|(_, b)| b).collect::<BTreeSet<_>>().len() as u32;
    OracleMetrics {
        reflection_depth: depth,
        correction: (corrected, articulations.len() as u32),
        distances: revises.iter().map(|r| r.2).collect(),
        falsification_events: challenges + qualifying,
        branch_count,
        uncertainty_tag_count: tags,
        engagement: 2 * challenges + tags + qualifying + branch_count.saturating_sub(1),
    }
}

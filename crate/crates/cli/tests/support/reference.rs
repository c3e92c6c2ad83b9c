//! Straight-line version of the streaming loop over plain vectors, kept
//! independent of the engine so traces can be compared record by record.

pub struct Params {
    pub tau: f64,
    pub lambda: f64,
    pub beta: f64,
    pub queue_len: usize,
    pub top_n: usize,
    pub gamma: f64,
    pub window: usize,
    pub bins: usize,
    pub negatives: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub s_t_pre: f64,
    pub s_v_pre: f64,
    pub s_pre: f64,
    pub delta: f64,
    /// "id", "ood" or "ambiguous".
    pub decision: &'static str,
    pub predicted_class: usize,
    pub predicted_negative: Option<usize>,
    pub s_t_post: f64,
    pub s_v_post: f64,
    pub s_post: f64,
}

#[derive(Clone)]
struct Slot {
    v: Vec<f64>,
    h: f64,
    seq: u64,
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn unit(a: &[f64]) -> Vec<f64> {
    let n = norm(a);
    a.iter().map(|x| x / n).collect()
}

fn cos(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    d / (norm(a) * norm(b))
}

/// Literal ratio: sum over positives of e^(s/τ) over the sum over everything.
fn ratio(pos: &[f64], neg: &[f64], tau: f64) -> f64 {
    let p: f64 = pos.iter().map(|s| (s / tau).exp()).sum();
    let n: f64 = neg.iter().map(|s| (s / tau).exp()).sum();
    p / (p + n)
}

fn aggregate(f: &[f64], slots: &[Slot], beta: f64) -> Vec<f64> {
    let w: Vec<f64> = slots.iter().map(|s| (-beta * (1.0 - cos(f, &s.v))).exp()).collect();
    let total: f64 = w.iter().sum();
    let mut out = vec![0.0; f.len()];
    for (s, wi) in slots.iter().zip(&w) {
        for (o, x) in out.iter_mut().zip(&s.v) {
            *o += wi / total * x;
        }
    }
    out
}

/// Softmax over cosines, first maximum, natural-log entropy.
fn assignment(f: &[f64], aggs: &[Vec<f64>]) -> (usize, f64) {
    let sims: Vec<f64> = aggs.iter().map(|a| cos(f, a)).collect();
    let z: f64 = sims.iter().map(|s| s.exp()).sum();
    let probs: Vec<f64> = sims.iter().map(|s| s.exp() / z).collect();
    let mut best = 0;
    for i in 1..sims.len() {
        if sims[i] > sims[best] {
            best = i;
        }
    }
    let h = -probs.iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>();
    (best, h)
}

fn insert(queue: &mut Vec<Slot>, cap: usize, v: Vec<f64>, h: f64, seq: u64) {
    if queue.len() < cap {
        queue.push(Slot { v, h, seq });
        return;
    }
    let mut worst = 0;
    for i in 1..queue.len() {
        let (a, b) = (&queue[i], &queue[worst]);
        if a.h > b.h || (a.h == b.h && a.seq < b.seq) {
            worst = i;
        }
    }
    if h < queue[worst].h {
        queue[worst] = Slot { v, h, seq };
    }
}

/// Exhaustive edge search; raw scores split by the bin they fall in.
fn threshold(window: &[f64], bins: usize) -> f64 {
    let bin = |s: f64| ((s * bins as f64) as usize).min(bins - 1);
    let mut occupied: Vec<usize> = window.iter().map(|&s| bin(s)).collect();
    occupied.sort();
    occupied.dedup();
    if window.len() < 2 || occupied.len() < 2 {
        return 0.5;
    }
    let var = |xs: &[f64]| {
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
    };
    let mut best = (f64::INFINITY, 0.5);
    for e in 1..bins {
        let d = e as f64 / bins as f64;
        let lo: Vec<f64> = window.iter().copied().filter(|&s| bin(s) < e).collect();
        let hi: Vec<f64> = window.iter().copied().filter(|&s| bin(s) >= e).collect();
        if lo.is_empty() || hi.is_empty() {
            continue;
        }
        let obj = var(&lo) + var(&hi);
        if obj < best.0 - 1e-12 {
            best = (obj, d);
        }
    }
    best.1
}

pub fn run(
    p: &Params,
    classes: &[(String, Vec<f64>)],
    corpus: &[(String, Vec<f64>)],
    samples: &[Vec<f64>],
) -> Vec<Row> {
    let t_p: Vec<Vec<f64>> = classes.iter().map(|c| unit(&c.1)).collect();
    let words: Vec<(String, Vec<f64>)> = corpus
        .iter()
        .filter(|w| !classes.iter().any(|c| c.0 == w.0))
        .map(|w| (w.0.clone(), unit(&w.1)))
        .collect();
    let mut used = vec![false; words.len()];

    // Initial negatives: smallest maximum cosine to any class, ties by index.
    let mut order: Vec<(f64, usize)> = words
        .iter()
        .enumerate()
        .map(|(i, w)| (t_p.iter().map(|t| cos(&w.1, t)).fold(f64::NEG_INFINITY, f64::max), i))
        .collect();
    order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let mut t_n: Vec<Vec<f64>> = Vec::new();
    for &(_, i) in order.iter().take(p.negatives) {
        used[i] = true;
        t_n.push(words[i].1.clone());
    }

    let mut seq = 0u64;
    let seed = |v: &Vec<f64>, seq: &mut u64| {
        let s = vec![Slot { v: v.clone(), h: f64::INFINITY, seq: *seq }];
        *seq += 1;
        s
    };
    let mut v_p: Vec<Vec<Slot>> = t_p.iter().map(|t| seed(t, &mut seq)).collect();
    let mut v_n: Vec<Vec<Slot>> = t_n.iter().map(|t| seed(t, &mut seq)).collect();
    let mut window: Vec<f64> = Vec::new();
    let mut rows = Vec::new();

    for raw in samples {
        let f = unit(raw);
        let score_t = |t_n: &[Vec<f64>]| {
            let pos: Vec<f64> = t_p.iter().map(|t| cos(&f, t)).collect();
            let neg: Vec<f64> = t_n.iter().map(|t| cos(&f, t)).collect();
            ratio(&pos, &neg, p.tau)
        };
        let score_v = |v_p: &[Vec<Slot>], v_n: &[Vec<Slot>]| {
            let pos: Vec<f64> = v_p.iter().map(|q| cos(&f, &aggregate(&f, q, p.beta))).collect();
            let neg: Vec<f64> = v_n.iter().map(|q| cos(&f, &aggregate(&f, q, p.beta))).collect();
            ratio(&pos, &neg, p.tau)
        };

        let s_t_pre = score_t(&t_n);
        let s_v_pre = score_v(&v_p, &v_n);
        let s_pre = p.lambda * s_t_pre + (1.0 - p.lambda) * s_v_pre;

        let delta = threshold(&window, p.bins);
        window.push(s_pre);
        if window.len() > p.window {
            window.remove(0);
        }

        let decision = if s_pre >= delta + p.gamma * (1.0 - delta) {
            "id"
        } else if s_pre < delta * (1.0 - p.gamma) {
            "ood"
        } else {
            "ambiguous"
        };

        let pos_aggs: Vec<Vec<f64>> = v_p.iter().map(|q| aggregate(&f, q, p.beta)).collect();
        let (k, h_pos) = assignment(&f, &pos_aggs);
        let mut predicted_negative = None;

        if decision != "ambiguous" {
            // Near words for OOD, far words for ID, among words not yet used.
            let mut cands: Vec<(f64, usize)> = (0..words.len())
                .filter(|&i| !used[i])
                .map(|i| {
                    let c = cos(&f, &words[i].1);
                    (if decision == "ood" { -c } else { c }, i)
                })
                .collect();
            cands.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            for &(_, i) in cands.iter().take(p.top_n) {
                used[i] = true;
                t_n.push(words[i].1.clone());
                v_n.push(vec![Slot { v: words[i].1.clone(), h: f64::INFINITY, seq }]);
                seq += 1;
            }
            if decision == "id" {
                insert(&mut v_p[k], p.queue_len, f.clone(), h_pos, seq);
                seq += 1;
            } else {
                let neg_aggs: Vec<Vec<f64>> = v_n.iter().map(|q| aggregate(&f, q, p.beta)).collect();
                let (m, h_neg) = assignment(&f, &neg_aggs);
                insert(&mut v_n[m], p.queue_len, f.clone(), h_neg, seq);
                seq += 1;
                predicted_negative = Some(m);
            }
        }

        let s_t_post = score_t(&t_n);
        let s_v_post = score_v(&v_p, &v_n);
        rows.push(Row {
            s_t_pre,
            s_v_pre,
            s_pre,
            delta,
            decision,
            predicted_class: k,
            predicted_negative,
            s_t_post,
            s_v_post,
            s_post: (1.0 - p.lambda) * s_t_post + p.lambda * s_v_post,
        });
    }
    rows
}

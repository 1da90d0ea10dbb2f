//! Answer-ranking score by direct enumeration of the 18 rankings.

/// Ranking of the scores 1..=10, best first. Family A steps up first.
fn ranking(step_up_first: bool, center: i32) -> Vec<i32> {
    let mut out = vec![center];
    let mut d = 1;
    while out.len() < 10 {
        let (first, second) = if step_up_first { (center + d, center - d) } else { (center - d, center + d) };
        for v in [first, second] {
            if (1..=10).contains(&v) {
                out.push(v);
            }
        }
        d += 1;
    }
    out
}

fn objective(order: &[i32], m: &[[u64; 10]; 10]) -> u128 {
    let rank = |score: i32| order.iter().position(|&v| v == score).unwrap();
    let mut total = 0u128;
    for i in 1..=10 {
        for j in 1..=10 {
            if rank(i) <= rank(j) {
                let c = m[i as usize - 1][j as usize - 1] as u128;
                total += c * c;
            }
        }
    }
    total
}

pub fn brute_force_ar(m: &[[u64; 10]; 10]) -> f64 {
    let mut scored = Vec::new();
    for center in 1..=9 {
        scored.push((objective(&ranking(true, center), m), center as f64 + 0.25));
        scored.push((objective(&ranking(false, center), m), center as f64 + 0.75));
    }
    let best = scored.iter().map(|(o, _)| *o).max().unwrap();
    let tied: Vec<f64> = scored.iter().filter(|(o, _)| *o == best).map(|(_, v)| *v).collect();
    tied.iter().sum::<f64>() / tied.len() as f64
}

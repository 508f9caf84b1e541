use kgsva::context::{ContextItem, ContextType};
use kgsva::llm::HeuristicCounter;
use kgsva::synthesis::{assemble_prompts, AssemblyConfig, PromptParts, PromptRenderer, SynthesisError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Concatenation of unbroken `x` runs: the heuristic count of a prompt is
/// then exactly the sum of its pieces (chars / 4).
struct Concat;

impl PromptRenderer for Concat {
    fn render(&self, p: &PromptParts) -> Result<String, SynthesisError> {
        let mut s = p.global_summary.clone();
        for c in p.rag.iter().chain(&p.kg) {
            s.push_str(&c.text);
        }
        Ok(s)
    }
}

fn sized(id: usize, tokens: usize, score: f64) -> ContextItem {
    let ty = if id % 2 == 0 { ContextType::Rag } else { ContextType::KgPath };
    ContextItem::new(ty, "s", "x".repeat(tokens * 4)).with_score(score)
}

fn preamble(tokens: usize) -> Vec<ContextItem> {
    vec![ContextItem::new(ContextType::SummaryDesign, "", "y".repeat(tokens * 4))]
}

/// Round-robin greedy placement on token sizes alone: items in score order,
/// each into the first prompt from the cursor with room left.
fn oracle(base: usize, limit: usize, budget: usize, sizes: &[(usize, f64)]) -> (Vec<Vec<usize>>, usize) {
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| sizes[b].1.total_cmp(&sizes[a].1));
    let mut load = vec![base; budget];
    let mut bins = vec![Vec::new(); budget];
    let (mut cursor, mut dropped) = (0, 0);
    for i in order {
        match (0..budget).map(|k| (cursor + k) % budget).find(|&p| load[p] + sizes[i].0 <= limit) {
            Some(p) => {
                load[p] += sizes[i].0;
                bins[p].push(i);
                cursor = (p + 1) % budget;
            }
            None => dropped += 1,
        }
    }
    (bins, dropped)
}

fn packed(base: usize, limit: usize, budget: usize, sizes: &[(usize, f64)]) -> (Vec<Vec<usize>>, usize, Vec<usize>) {
    let items: Vec<ContextItem> = sizes.iter().enumerate().map(|(i, &(t, s))| sized(i, t, s)).collect();
    let b = assemble_prompts("s", &preamble(base), &items, &Concat, &HeuristicCounter, AssemblyConfig { budget, token_limit: limit }).unwrap();
    let bins = b
        .prompts
        .iter()
        .map(|p| {
            let mut ids: Vec<usize> = p.parts.rag.iter().chain(&p.parts.kg).map(|c| items.iter().position(|x| x.score == c.score).unwrap()).collect();
            ids.sort_by(|&a, &b| sizes[b].1.total_cmp(&sizes[a].1));
            ids
        })
        .collect();
    (bins, b.dropped, b.prompts.iter().map(|p| p.token_count).collect())
}

#[test]
fn twelve_items_three_prompts() {
    // 50-token preamble, room for 5 items of 100 tokens beyond it
    let sizes: Vec<(usize, f64)> = (0..12).map(|i| (100, 1.0 - i as f64 / 100.0)).collect();
    let (bins, dropped, counts) = packed(50, 590, 3, &sizes);
    assert_eq!(bins.len(), 3);
    assert!(bins.iter().all(|b| b.len() <= 5));
    assert_eq!(bins.iter().map(Vec::len).sum::<usize>() + dropped, 12);
    assert_eq!((bins.clone(), dropped), oracle(50, 590, 3, &sizes));
    assert_eq!(bins, vec![vec![0, 3, 6, 9], vec![1, 4, 7, 10], vec![2, 5, 8, 11]]);
    assert!(counts.iter().all(|&c| c <= 590));
}

#[test]
fn overflow_is_dropped_and_counted() {
    let sizes: Vec<(usize, f64)> = (0..20).map(|i| (100, 1.0 - i as f64 / 100.0)).collect();
    let (bins, dropped, _) = packed(50, 590, 3, &sizes);
    assert_eq!(dropped, 5);
    assert!(bins.iter().all(|b| b.len() == 5));
    // the lowest-scored five are the ones left out
    assert!(bins.iter().flatten().all(|&i| i < 15));
}

#[test]
fn random_sizes_follow_the_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for case in 0..300 {
        let budget = rng.random_range(1..5);
        let base = rng.random_range(1..200);
        let limit = base + rng.random_range(0..1500);
        let n = rng.random_range(0..40);
        let sizes: Vec<(usize, f64)> = (0..n).map(|i| (rng.random_range(1..600), i as f64 + rng.random::<f64>() * 0.5)).collect();
        let (bins, dropped, counts) = packed(base, limit, budget, &sizes);
        let (mut want, want_dropped) = oracle(base, limit, budget, &sizes);
        // empty prompts after the first are omitted
        let first = want.remove(0);
        want.retain(|b| !b.is_empty());
        want.insert(0, first);
        assert_eq!((bins, dropped), (want, want_dropped), "case {case}");
        assert!(counts.iter().all(|&c| c <= limit), "case {case}");
    }
}

use std::collections::HashMap;
use std::sync::Arc;

use proptest::prelude::*;

use factcheck_core::community::{CommunityStore, FileStore, MemoryStore, SortOrder, Page, VoteDirection};

fn direction(up: bool) -> VoteDirection {
    if up {
        VoteDirection::Up
    } else {
        VoteDirection::Down
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Score always equals the sum over the latest vote of each voter, where
    /// the reference model is a plain map.
    #[test]
    fn score_matches_vote_model(ops in prop::collection::vec((0u64..5, 0u8..12, any::<bool>()), 0..300)) {
        let store = MemoryStore::new();
        for i in 0..5 {
            store.create_post("author", &format!("post {i}"), "", None).unwrap();
        }
        let mut model: HashMap<(u64, u8), bool> = HashMap::new();
        for (post, voter, up) in ops {
            let post_id = post + 1;
            let score = store.cast_vote(post_id, &format!("v{voter}"), direction(up)).unwrap();
            model.insert((post, voter), up);
            let expected: i64 = model
                .iter()
                .filter(|((p, _), _)| *p == post)
                .map(|(_, up)| if *up { 1 } else { -1 })
                .sum();
            prop_assert_eq!(score, expected);
        }
        let snapshot = store.snapshot();
        for post in store.list_posts(SortOrder::Top, Page { number: 1, size: 10 }) {
            prop_assert_eq!(post.score, snapshot.recomputed_score(post.id));
        }
    }
}

#[test]
fn concurrent_casts_keep_one_vote_per_voter() {
    let store: Arc<dyn CommunityStore> = Arc::new(MemoryStore::new());
    let post = store.create_post("a", "contested", "", None).unwrap();
    let handles: Vec<_> = (0..100)
        .map(|i| {
            let store = store.clone();
            std::thread::spawn(move || {
                // 50 distinct voters, each casting twice with opposite directions
                let voter = format!("voter-{}", i % 50);
                store.cast_vote(post.id, &voter, direction(i % 3 == 0)).unwrap();
            })
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
    let votes = store.votes(post.id);
    assert_eq!(votes.len(), 50);
    let expected: i64 = votes.iter().map(|v| v.direction.weight()).sum();
    assert_eq!(store.get_post(post.id).unwrap().score, expected);
}

#[test]
fn file_store_replay_preserves_scores() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.jsonl");
    let before = {
        let store = FileStore::open(&path).unwrap();
        for i in 0..3 {
            store.create_post("a", &format!("p{i}"), "", None).unwrap();
        }
        for i in 0..60u64 {
            store.cast_vote(i % 3 + 1, &format!("v{}", i % 7), direction(i % 2 == 0)).unwrap();
        }
        store.list_posts(SortOrder::Top, Page::default())
    };
    let after = FileStore::open(&path).unwrap().list_posts(SortOrder::Top, Page::default());
    assert_eq!(before, after);
}

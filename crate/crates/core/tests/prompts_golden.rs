//! Rendered prompts must equal the reference wording with slots filled in.
//! The golden files hold the reference templates; substitution here is a
//! plain string replace, independent of the renderer.

use std::collections::BTreeMap;
use std::path::PathBuf;

use factcheck_core::gateway::prompts::{render, PromptKind};

fn golden(kind: PromptKind) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(format!("{}.txt", kind.name()));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn sample_values(kind: PromptKind) -> BTreeMap<String, String> {
    kind.slots()
        .iter()
        .map(|s| (s.to_string(), format!("<<{s} value: 10% off, \"quoted\", {{braces}}>>")))
        .collect()
}

#[test]
fn templates_match_golden_files() {
    for kind in PromptKind::ALL {
        assert_eq!(kind.template(), golden(kind), "{kind}");
    }
}

#[test]
fn rendered_prompts_match_golden_substitution() {
    for kind in PromptKind::ALL {
        let values = sample_values(kind);
        let mut expected = golden(kind);
        for (slot, value) in &values {
            expected = expected.replace(&format!("{{{slot}}}"), value);
        }
        assert_eq!(render(kind, &values).unwrap(), expected, "{kind}");
    }
}

#[test]
fn slot_values_are_not_re_expanded() {
    let mut values = BTreeMap::new();
    values.insert("claim".to_string(), "{content} and {claim}".to_string());
    let out = render(PromptKind::QueryGeneration, &values).unwrap();
    assert!(out.contains("Claim: {content} and {claim}\n"));
}

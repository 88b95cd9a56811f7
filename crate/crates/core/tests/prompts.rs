use std::path::PathBuf;

use molga::llm_ops::{
    parse_reply, render_caption, render_crossover, render_mutation_for, task_ids, TaskPrompt,
    TemplateId,
};
use molga::molgraph::parse_smiles;
use molga::selfies::decode_selfies;
use proptest::prelude::*;

fn golden(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn task(id: &str) -> TaskPrompt {
    TaskPrompt::builtin(id).unwrap_or_else(|| panic!("no prompt for {id}"))
}

#[test]
fn crossover_prompts_match_golden_files() {
    for id in ["qed", "isomers_c9h10n2o2pf2cl", "maxjnk3_maxqed_minsa", "3pbl_docking"] {
        let text = render_crossover(&task(id), &[("CCO", 0.3), ("CCN", 0.5)]).unwrap();
        assert_eq!(text, golden(&format!("gpt4_{id}.txt")), "{id}");
    }
}

#[test]
fn mutation_prompts_match_golden_files() {
    let ethanol = parse_smiles("CCO").unwrap();
    for id in ["qed", "jnk3", "isomers_c9h10n2o2pf2cl", "deco_hop"] {
        let text = render_mutation_for(&task(id), &ethanol).unwrap();
        assert_eq!(text, golden(&format!("biot5_{id}.txt")), "{id}");
    }
}

#[test]
fn caption_prompts_match_golden_files() {
    for id in ["3eml_docking", "isomers_c9h10n2o2pf2cl"] {
        assert_eq!(render_caption(&task(id)).unwrap(), golden(&format!("molstm_{id}.txt")));
    }
}

#[test]
fn every_task_renders_stably() {
    let ethanol = parse_smiles("CCO").unwrap();
    for id in task_ids() {
        let t = task(id);
        if t.gpt4_objective.is_some() {
            let a = render_crossover(&t, &[("CCO", 0.25), ("c1ccccc1", 0.75)]).unwrap();
            assert_eq!(a, render_crossover(&t, &[("CCO", 0.25), ("c1ccccc1", 0.75)]).unwrap());
            assert_eq!(a.matches("(CCO, 0.25)").count(), 1, "{id}");
            assert!(!a.contains(".."), "{id}");
            assert!(!a.contains('\\') || a.matches('\\').count() == 1, "{id}");
        }
        if t.biot5_objective.is_some() {
            let m = render_mutation_for(&t, &ethanol).unwrap();
            assert_eq!(m.matches("<bom>[C][C][O]<eom>").count(), 1, "{id}");
            assert!(!m.contains(".."), "{id}");
        }
        assert!(render_caption(&t).unwrap().starts_with("This molecule"), "{id}");
    }
}

#[test]
fn boxed_reply_examples() {
    let reply = "{<<<Explanation>>>: swapped an amine, <<<Molecule>>>: \\box{CCO}}";
    assert_eq!(parse_reply(reply, TemplateId::Gpt4Crossover).unwrap().to_smiles(), "CCO");
    assert!(parse_reply("I propose CCO", TemplateId::Gpt4Crossover).is_none());
    assert!(parse_reply("\\box{C(C)(C)(C)(C)C}", TemplateId::Gpt4Crossover).is_none());
}

proptest! {
    #[test]
    fn random_selfies_replies_decode(tokens in prop::collection::vec(
        prop::sample::select(vec!["[C]", "[N]", "[O]", "[=C]", "[#N]", "[F]", "[Branch1]", "[Ring1]", "[=O]", "[S]", "[=Branch1]"]),
        1..30,
    )) {
        let reply = tokens.concat();
        let direct = decode_selfies(&reply).unwrap();
        let parsed = parse_reply(&format!("<bom>{reply}<eom>"), TemplateId::Biot5Mutation);
        match parsed {
            Some(m) => {
                prop_assert!(m.is_valid());
                prop_assert_eq!(m.to_smiles(), direct.to_smiles());
            }
            None => prop_assert!(direct.is_empty()),
        }
    }
}

//! Prompt catalog and reply parsing for the LLM-backed operators.

use serde::{Deserialize, Serialize};

use super::LlmError;
use crate::molgraph::{parse_smiles, Molecule};
use crate::selfies::{decode_selfies, encode_selfies};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TemplateId {
    Gpt4Crossover,
    Biot5Mutation,
    MolstmCaption,
}

/// Task-specific slot values for each template family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskPrompt {
    /// Phrase completing "propose a new molecule that ...".
    pub gpt4_objective: Option<String>,
    /// Phrase completing "I have two molecules and their ...".
    pub gpt4_task: Option<String>,
    /// Sentence describing the objective; omitted when absent.
    pub gpt4_definition: Option<String>,
    /// Phrase completing "generate a SELFIES molecule that ...".
    pub biot5_objective: Option<String>,
    /// Text caption describing the desired molecule.
    pub molstm_caption: Option<String>,
}

struct Entry {
    id: &'static str,
    gpt4: Option<(&'static str, &'static str, Option<&'static str>)>,
    biot5: Option<&'static str>,
    molstm: Option<&'static str>,
}

const PHCO: &str = "CCCOc1cc2ncnc(Nc3ccc4ncsc4c3)c2cc1S(=O)(=O)C(C)(C)C";
const PHCO_SELFIES: &str = "[C][C][C][O][C][=C][C][=N][C][=N][C][Branch1][#C][N][C][=C][C][=C][N][=C][S][C][Ring1][Branch1][=C][Ring1][=Branch2][=C][Ring1][S][C][=C][Ring2][Ring1][Ring2][S][=Branch1][C][=O][=Branch1][C][=O][C][Branch1][C][C][Branch1][C][C][C]";

fn catalog() -> Vec<Entry> {
    vec![
        Entry {
            id: "qed",
            gpt4: Some((
                "has a higher QED score",
                "QED scores",
                Some("The QED score measures the drug-likeness of the molecule."),
            )),
            biot5: Some("looks more like a drug"),
            molstm: Some("This molecule is like a drug."),
        },
        Entry {
            id: "jnk3",
            gpt4: Some((
                "has a higher JNK3 score",
                "JNK3 scores",
                Some("The JNK3 score measures a molecular's biological activity against JNK3."),
            )),
            biot5: Some("inhibits JNK3 more"),
            molstm: Some("This molecule inhibits JNK3."),
        },
        Entry {
            id: "gsk3b",
            gpt4: Some((
                "has a higher GSK3\u{3b2} score",
                "GSK3\u{3b2} scores",
                Some("The GSK3\u{3b2} score measures a molecular's biological activity against GSK3\u{3b2}."),
            )),
            biot5: Some("inhibits GSK3B more"),
            molstm: Some("This molecule inhibits GSK3B."),
        },
        Entry {
            id: "drd2",
            gpt4: Some((
                "has a higher DRD2 score",
                "DRD2 scores",
                Some("The DRD2 score measures a molecule's biological activity against a biological target named the dopamine type 2 receptor (DRD2)."),
            )),
            biot5: Some("inhibits DRD2 more"),
            molstm: Some("This molecule inhibits DRD2."),
        },
        Entry {
            id: "mestranol_similarity",
            gpt4: Some((
                "has a higher mestranol similarity score",
                "mestranol similarity scores",
                Some("The mestranol similarity score measures a molecule's Tanimoto similarity with Mestranol."),
            )),
            biot5: Some("looks more like Mestranol"),
            molstm: Some("This molecule looks like Mestranol."),
        },
        Entry {
            id: "albuterol_similarity",
            gpt4: None,
            biot5: Some("looks more like Albuterol"),
            molstm: Some("This molecule looks like Albuterol."),
        },
        Entry {
            id: "thiothixene_rediscovery",
            gpt4: Some((
                "has a higher thiothixene rediscovery score",
                "thiothixene rediscovery scores",
                Some("The thiothixene rediscovery score measures a molecule's Tanimoto similarity with thiothixene's SMILES to check whether it could be rediscovered."),
            )),
            biot5: Some("looks more like Thiothixene"),
            molstm: Some("This molecule looks like Thiothixene."),
        },
        Entry {
            id: "celecoxib_rediscovery",
            gpt4: None,
            biot5: Some("looks more like Celecoxib"),
            molstm: Some("This molecule looks like Celecoxib."),
        },
        Entry {
            id: "perindopril_mpo",
            gpt4: Some((
                "has a higher perindopril multi-objective score",
                "perindopril multi-objective scores",
                Some("The perindopril multi-objective score measures the geometric means of several scores, including the molecule's Tanimoto similarity to perindopril and the number of aromatic rings."),
            )),
            biot5: Some("looks more like Perindopril and has 2 aromatic rings"),
            molstm: Some("This molecule looks like Perindopril and has 2 aromatic rings."),
        },
        Entry {
            id: "ranolazine_mpo",
            gpt4: Some((
                "has a higher ranolazine multi-objective score",
                "ranolazine multi-objective scores",
                Some("The ranolazine multi-objective score measures the geometric means of several scores, including the molecule's Tanimoto similarity to ranolazine, TPSA score LogP score and number of fluorine atoms."),
            )),
            biot5: Some("looks more like Ranolazine, is highly permeable, is hydrophobic, and has 1 F atom"),
            molstm: Some("This molecule looks like Ranolazine, is highly permeable, is hydrophobic, and has 1 F atom."),
        },
        Entry {
            id: "sitagliptin_mpo",
            gpt4: Some((
                "has a higher sitagliptin multi-objective score",
                "sitagliptin multi-objective scores",
                Some("The sitagliptin multi-objective score measures the geometric means of several scores, including the molecule's Tanimoto similarity to sitagliptin, TPSA score, LogP score and isomer score with C16H15F6N5O."),
            )),
            biot5: Some("has the formula C16H15F6N5O, looks more like Sitagliptin, is highly permeable, and is hydrophobic"),
            molstm: Some("This molecule has the formula C16H15F6N5O, looks like Sitagliptin, is highly permeable, and is hydrophobic."),
        },
        Entry {
            id: "isomers_c9h10n2o2pf2cl",
            gpt4: Some((
                "has a higher isomer score",
                "isomer scores",
                Some("The isomer score measures a molecule's similarity in terms of atom counter to C9H10N2O2PF2Cl."),
            )),
            biot5: Some("has the formula C9H10N2O2PF2Cl"),
            molstm: Some("This molecule has the atoms C9H10N2O2PF2Cl."),
        },
        Entry {
            id: "isomers_c7h8n2o2",
            gpt4: Some((
                "has a higher isomer score",
                "isomer scores",
                Some("The isomer score measures a molecule's similarity in terms of atom counter to C7H8N2O2."),
            )),
            biot5: Some("has the formula C7H8N2O2"),
            molstm: Some("This molecule has the atoms C7H8N2O2."),
        },
        Entry {
            id: "deco_hop",
            gpt4: Some((
                "has a higher deco hop score",
                "deco hop scores",
                Some("The deco hop score is the arithmetic means of several scores, including binary score about whether contain certain SMARTS structures (maximize the similarity to the SMILE '[#7]-c1n[c;h1]nc2[c;h1]c(-[#8])[c;h0][c;h1]c12', while excluding specific SMARTS patterns '[#7]-c1ccc2ncsc2c1' and 'CS([#6])(=O)=O') and (2) the molecule's Tanimoto similarity to PHCO 'CCCOc1cc2ncnc(Nc3ccc4ncsc4c3)c2cc1S(=O)(=O)C(C)(C)C'."),
            )),
            biot5: None,
            molstm: None,
        },
        Entry {
            id: "scaffold_hop",
            gpt4: Some((
                "has a higher scaffold hop score",
                "scaffold hop scores",
                Some("The scaffold hop score is the arithmetic means of several scores, including (1) binary score about whether contains certain SMARTS structures (maximize the similarity to the SMILE '[#6]-[#6]-[#6]-[#8]-[#6]~[#6]~[#6]~[#6]~[#6]-[#7]-c1ccc2ncsc2c1', while excluding specific SMARTS patterns '[#7]-c1n[c;h1]nc2[c;h1]c(-[#8])[c;h0][c;h1]c12') and (2) the molecule's Tanimoto similarity to PHCO 'CCCOc1cc2ncnc(Nc3ccc4ncsc4c3)c2cc1S(=O)(=O)C(C)(C)C'."),
            )),
            biot5: None,
            molstm: None,
        },
        Entry {
            id: "maxjnk3_maxqed_minsa",
            gpt4: Some((
                "has a higher QED score, a higher JNK3 score, and a lower SA score",
                "QED, SA (Synthetic Accessibility), and JNK3 scores",
                None,
            )),
            biot5: Some("is a greater inhibitor of JNK3, is more synthesizable and is more like a drug"),
            molstm: Some("This molecule is synthesizable, looks like a drug, and inhibits JNK3."),
        },
        Entry {
            id: "maxgsk3b_maxqed_minsa",
            gpt4: Some((
                "has a higher QED score, a higher GSK3\u{3b2} score, and a lower SA score",
                "QED, SA (Synthetic Accessibility), and GSK3\u{3b2} scores",
                None,
            )),
            biot5: Some("inhibits GSK3B more, is more synthesizable and is more like a drug"),
            molstm: Some("This molecule is synthesizable, looks like a drug, and inhibits GSK3B."),
        },
        Entry {
            id: "maxjnk3_maxqed_minsa_mindrd2_mingsk3b",
            gpt4: Some((
                "has a higher QED score, a higher JNK3 score, a lower GSK3\u{3b2} score, a lower DRD2 score and a lower SA score",
                "QED, SA (Synthetic Accessibility), JNK3, GSK3\u{3b2} and DRD2 scores",
                None,
            )),
            biot5: Some("is a greater inhibitor of JNK3, is more like a drug, inhibits GSK3B less, inhibits DRD2 less and is more synthesizable"),
            molstm: Some("This molecule is synthesizable, does not inhibit GSKB3, does not inhibit DRD2, looks like a drug, and inhibits JNK3."),
        },
        Entry {
            id: "2rgp_docking",
            gpt4: Some((
                "binds better to EGFR",
                "docking scores to EGFR",
                Some("The docking score measures how well a molecule binds to EGFR. A lower docking score generally indicates a stronger or more favorable binding affinity."),
            )),
            biot5: Some("inhibits EGFR more"),
            molstm: Some("This molecule inhibits EGFR."),
        },
        Entry {
            id: "3pbl_docking",
            gpt4: Some((
                "binds better to DRD3",
                "docking scores to DRD3",
                Some("The docking score measures how well a molecule binds to DRD3. A lower docking score generally indicates a stronger or more favorable binding affinity."),
            )),
            biot5: Some("inhibits DRD3 more"),
            molstm: Some("This molecule inhibits DRD3."),
        },
        Entry {
            id: "3eml_docking",
            gpt4: Some((
                "binds better to adenosine receptor A2a",
                "docking scores to adenosine receptor A2a",
                Some("The docking score measures how well a molecule binds to adenosine receptor A2a. A lower docking score generally indicates a stronger or more favorable binding affinity."),
            )),
            biot5: Some("binds better to adenosine receptor A2a"),
            molstm: Some("This molecule binds to adenosine receptor A2a."),
        },
    ]
}

fn hop_biot5(id: &str) -> Option<String> {
    match id {
        "deco_hop" => Some(format!(
            "does not contain the substructure [#7]-c1ccc2ncsc2c1, does not contain the substructure CS([#6])(=O)=O, contains the scaffold [#7]-c1n[c;h1]nc2[c;h1]c(-[#8])[c;h0][c;h1]c12, and is similar to {PHCO_SELFIES}"
        )),
        "scaffold_hop" => Some(format!(
            "does not contain the scaffold [#7]-c1n[c;h1]nc2[c;h1]c(-[#8])[c;h0][c;h1]c12, contains the substructure [#6]-[#6]-[#6]-[#8]-[#6]~[#6]~[#6]~[#6]~[#6]-[#7]-c1ccc2ncsc2c1, and is similar to the SELFIES {PHCO_SELFIES}"
        )),
        _ => None,
    }
}

fn hop_molstm(id: &str) -> Option<String> {
    match id {
        "deco_hop" => Some(format!(
            "This molecule does not contain the substructure [#7]-c1ccc2ncsc2c1, which is a 6-aminobenzothiazole, does not contain the substructure CS([#6])(=O)=O, which is a dimethyl sulfone, contains the scaffold, which is a 4-amino-7-hydroxyquinazoline, and is similar to {PHCO}."
        )),
        "scaffold_hop" => Some(format!(
            "This molecule does not contain the scaffold [#7]-c1n[c;h1]nc2[c;h1]c(-[#8])[c;h0][c;h1]c12, contains the substructure [#6]-[#6]-[#6]-[#8]-[#6]~[#6]~[#6]~[#6]~[#6]-[#7]-c1ccc2ncsc2c1, and is similar to {PHCO}."
        )),
        _ => None,
    }
}

/// Ids of all built-in task prompts.
pub fn task_ids() -> Vec<&'static str> {
    catalog().iter().map(|e| e.id).collect()
}

impl TaskPrompt {
    /// Built-in prompt slots for a task id.
    pub fn builtin(id: &str) -> Option<TaskPrompt> {
        let entry = catalog().into_iter().find(|e| e.id == id)?;
        Some(TaskPrompt {
            gpt4_objective: entry.gpt4.map(|g| g.0.to_string()),
            gpt4_task: entry.gpt4.map(|g| g.1.to_string()),
            gpt4_definition: entry.gpt4.and_then(|g| g.2.map(str::to_string)),
            biot5_objective: entry.biot5.map(str::to_string).or_else(|| hop_biot5(id)),
            molstm_caption: entry.molstm.map(str::to_string).or_else(|| hop_molstm(id)),
        })
    }
}

fn missing(template: TemplateId, slot: &str) -> LlmError {
    LlmError::Template(format!("{template:?} prompt needs the {slot} slot"))
}

/// GPT-4 style crossover prompt for two scored parents.
pub fn render_crossover(task: &TaskPrompt, parents: &[(&str, f64)]) -> Result<String, LlmError> {
    let t = TemplateId::Gpt4Crossover;
    let [(sa, fa), (sb, fb)] = parents else {
        return Err(LlmError::Arity {
            template: t,
            expected: 2,
            found: parents.len(),
        });
    };
    let task_text = task.gpt4_task.as_deref().ok_or_else(|| missing(t, "task"))?;
    let objective = task.gpt4_objective.as_deref().ok_or_else(|| missing(t, "objective"))?;
    let mut head = format!("I have two molecules and their {task_text}.");
    if let Some(def) = &task.gpt4_definition {
        head.push(' ');
        head.push_str(def);
    }
    Ok(format!(
        "{head}\n\
         \n\
         ({sa}, {fa})\n\
         ({sb}, {fb})\n\
         \n\
         Please propose a new molecule that {objective}. You can either make crossover and mutations based on the given molecules or just propose a new molecule based on your knowledge.\n\
         Your output should follow the format: {{<<<Explanation>>>: $EXPLANATION, <<<Molecule>>>: \\box{{$Molecule}}}}. Here are the requirements:\n\
         1. $EXPLANATION should be your analysis.\n\
         2. The $Molecule should be the smiles of your proposed molecule.\n\
         3. The molecule should be valid."
    ))
}

/// BioT5 style mutation prompt wrapping the input SELFIES.
pub fn render_mutation(task: &TaskPrompt, selfies: &str) -> Result<String, LlmError> {
    let objective = task
        .biot5_objective
        .as_deref()
        .ok_or_else(|| missing(TemplateId::Biot5Mutation, "objective"))?;
    Ok(format!(
        "Definition: You are given a molecule SELFIES. Your job is to generate a SELFIES molecule that {objective}. Now complete the following example - Input: <bom>{selfies}<eom> Output: "
    ))
}

/// Mutation prompt for a molecule; fails when it has no SELFIES encoding.
pub fn render_mutation_for(task: &TaskPrompt, mol: &Molecule) -> Result<String, LlmError> {
    let selfies = encode_selfies(mol).map_err(|e| LlmError::Template(format!("cannot encode input: {e}")))?;
    render_mutation(task, &selfies)
}

pub fn render_caption(task: &TaskPrompt) -> Result<String, LlmError> {
    task.molstm_caption
        .clone()
        .ok_or_else(|| missing(TemplateId::MolstmCaption, "caption"))
}

/// Text inside the first `\box{...}` or `\boxed{...}`.
pub fn extract_boxed(reply: &str) -> Option<&str> {
    let (start, marker) = ["\\boxed{", "\\box{"]
        .iter()
        .filter_map(|m| reply.find(m).map(|i| (i, *m)))
        .min_by_key(|&(i, _)| i)?;
    let body = &reply[start + marker.len()..];
    let mut depth = 1usize;
    for (i, c) in body.char_indices() {
        match c {
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(body[..i].trim());
                }
            }
            _ => {}
        }
    }
    None
}

/// Molecule proposed in a reply, or `None` if the reply is unusable.
pub fn parse_reply(reply: &str, template: TemplateId) -> Option<Molecule> {
    match template {
        TemplateId::Gpt4Crossover => {
            let smiles = extract_boxed(reply)?.trim_matches(|c| c == '`' || c == '"' || c == '\'');
            parse_smiles(smiles).ok()
        }
        TemplateId::Biot5Mutation => {
            let text = reply.trim();
            let text = text.strip_prefix("<bom>").unwrap_or(text);
            let text = text.strip_suffix("<eom>").unwrap_or(text).trim();
            let mol = decode_selfies(text).ok()?;
            (!mol.is_empty()).then_some(mol)
        }
        TemplateId::MolstmCaption => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossover_prompt_carries_both_parents() {
        let task = TaskPrompt::builtin("qed").unwrap();
        let text = render_crossover(&task, &[("CCO", 0.3), ("CCN", 0.5)]).unwrap();
        for needle in ["(CCO, 0.3)", "(CCN, 0.5)", "<<<Molecule>>>: \\box{$Molecule}"] {
            assert_eq!(text.matches(needle).count(), 1, "{needle}");
        }
        assert_eq!(text, render_crossover(&task, &[("CCO", 0.3), ("CCN", 0.5)]).unwrap());
    }

    #[test]
    fn crossover_arity_is_checked() {
        let task = TaskPrompt::builtin("qed").unwrap();
        assert!(matches!(
            render_crossover(&task, &[("CCO", 0.3)]),
            Err(LlmError::Arity { expected: 2, found: 1, .. })
        ));
    }

    #[test]
    fn multi_objective_prompt_omits_definition() {
        let task = TaskPrompt::builtin("maxjnk3_maxqed_minsa").unwrap();
        let text = render_crossover(&task, &[("C", 0.1), ("N", 0.2)]).unwrap();
        assert!(text.starts_with("I have two molecules and their QED, SA (Synthetic Accessibility), and JNK3 scores.\n"));
    }

    #[test]
    fn mutation_prompt_wraps_selfies() {
        let task = TaskPrompt::builtin("jnk3").unwrap();
        let mol = parse_smiles("CCO").unwrap();
        let text = render_mutation_for(&task, &mol).unwrap();
        let selfies = encode_selfies(&mol).unwrap();
        assert!(text.contains(&format!("<bom>{selfies}<eom>")));
        assert!(text.contains("generate a SELFIES molecule that inhibits JNK3 more. Now"));
    }

    #[test]
    fn boxed_extraction() {
        let reply = "{<<<Explanation>>>: swap the amine, <<<Molecule>>>: \\box{CCO}}";
        assert_eq!(extract_boxed(reply), Some("CCO"));
        assert_eq!(extract_boxed("\\boxed{ c1ccccc1 } trailing"), Some("c1ccccc1"));
        assert_eq!(extract_boxed("no marker here"), None);
        assert_eq!(extract_boxed("\\box{unterminated"), None);
        let m = parse_reply(reply, TemplateId::Gpt4Crossover).unwrap();
        assert_eq!(m.to_smiles(), "CCO");
        assert!(parse_reply("\\box{C(C)(C)(C)(C)C}", TemplateId::Gpt4Crossover).is_none());
    }

    #[test]
    fn selfies_reply() {
        let m = parse_reply(" <bom>[C][C][O]<eom>", TemplateId::Biot5Mutation).unwrap();
        assert_eq!(m.to_smiles(), "CCO");
        assert!(parse_reply("[Xx]", TemplateId::Biot5Mutation).is_none());
        assert!(parse_reply("", TemplateId::Biot5Mutation).is_none());
    }

    #[test]
    fn catalog_is_complete_per_family() {
        for id in task_ids() {
            let t = TaskPrompt::builtin(id).unwrap();
            assert!(t.gpt4_objective.is_some() || t.biot5_objective.is_some(), "{id}");
        }
        assert!(TaskPrompt::builtin("deco_hop").unwrap().biot5_objective.unwrap().ends_with("[C][C][C]"));
    }
}

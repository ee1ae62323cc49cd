//! Prompt templates, shipped as text assets and rendered by placeholder
//! substitution. The rendered bytes are part of the pipeline contract:
//! tests pin them, and every run archives the templates it used.

use std::collections::BTreeMap;
use std::path::Path;

pub const SYSTEM_SPORTING: &str = include_str!("../assets/prompts/system_sporting.txt");
pub const SYSTEM_GRADER: &str = include_str!("../assets/prompts/system_grader.txt");
pub const TOKEN_GEN: &str = include_str!("../assets/prompts/token_gen.txt");
pub const FACT_EXTRACT: &str = include_str!("../assets/prompts/fact_extract.txt");
pub const FACT_GEN_SKIP: &str = include_str!("../assets/prompts/fact_gen_skip.txt");
pub const FACT_GEN_NOSKIP: &str = include_str!("../assets/prompts/fact_gen_noskip.txt");
pub const GRADING: &str = include_str!("../assets/prompts/grading.txt");
pub const RAG_ANSWER: &str = include_str!("../assets/prompts/rag_answer.txt");

/// Substitute `{name}` placeholders. Unknown placeholders are left intact so
/// a template drift shows up in output rather than vanishing silently.
pub fn render(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (name, value) in values {
        out = out.replace(&format!("{{{name}}}"), value);
    }
    out
}

pub fn token_gen_prompt(
    theme: &str,
    passage: &str,
    seed_question: &str,
    seed_answer: &str,
) -> String {
    render(
        TOKEN_GEN,
        &[
            ("theme", theme),
            ("passage", passage),
            ("seed_question", seed_question),
            ("seed_answer", seed_answer),
        ],
    )
}

pub fn fact_extract_prompt(theme: &str, passage: &str) -> String {
    render(FACT_EXTRACT, &[("theme", theme), ("passage", passage)])
}

pub fn fact_gen_prompt(theme: &str, fact: &str, allow_skip: bool) -> String {
    let template = if allow_skip {
        FACT_GEN_SKIP
    } else {
        FACT_GEN_NOSKIP
    };
    render(template, &[("theme", theme), ("fact", fact)])
}

pub fn grading_prompt(question: &str, ref_answer: &str, pred_answer: &str) -> String {
    render(
        GRADING,
        &[
            ("question", question),
            ("ref_answer", ref_answer),
            ("pred_answer", pred_answer),
        ],
    )
}

pub fn grader_system_prompt(theme: &str) -> String {
    render(SYSTEM_GRADER, &[("theme", theme)])
}

pub fn rag_answer_prompt(theme: &str, context: &str, question: &str) -> String {
    render(
        RAG_ANSWER,
        &[
            ("theme", theme),
            ("context", context),
            ("question", question),
        ],
    )
}

/// Archive the templates in use next to a run's artifacts.
pub fn archive_templates(dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let assets: &[(&str, &str)] = &[
        ("system_sporting.txt", SYSTEM_SPORTING),
        ("system_grader.txt", SYSTEM_GRADER),
        ("token_gen.txt", TOKEN_GEN),
        ("fact_extract.txt", FACT_EXTRACT),
        ("fact_gen_skip.txt", FACT_GEN_SKIP),
        ("fact_gen_noskip.txt", FACT_GEN_NOSKIP),
        ("grading.txt", GRADING),
        ("rag_answer.txt", RAG_ANSWER),
    ];
    for (name, content) in assets {
        std::fs::write(dir.join(name), content)?;
    }
    Ok(())
}

/// The contextualizing theme snippet for each bundled article.
pub fn bundled_themes() -> BTreeMap<&'static str, &'static str> {
    BTreeMap::from([
        ("2023-cricket-world-cup", "the 2023 Cricket World Cup"),
        ("2018-fifa-world-cup", "the 2018 FIFA World Cup"),
        (
            "2023-fifa-womens-world-cup",
            "the recent 2023 FIFA Women's World Cup",
        ),
        ("2023-superbowl-lvii", "the recent 2023 Superbowl LVII"),
        (
            "2023-ncaa-division-i-mens-basketball-tournament",
            "the recent 2023 NCAA Division I Men's Basketball tournament",
        ),
        (
            "2023-pga-masters-tournament",
            "the recent 2023 PGA Master's Tournament",
        ),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn token_gen_renders_fixture() {
        let got = token_gen_prompt(
            "the 2023 Cricket World Cup",
            "India won.",
            "Who won?",
            "India.",
        );
        let want = "Please write 10 questions and answers probing the facts and statistics \
                    contained in the following snippet from an article about the 2023 Cricket \
                    World Cup:\n\nIndia won.\n\n1. Q: Who won? A: India.\n2. ";
        assert_eq!(got, want);
    }

    #[test]
    fn fact_extract_contains_anchors() {
        let got = fact_extract_prompt("the 2018 FIFA World Cup", "France won the final.");
        assert!(got.starts_with("Please break down the following snippet"));
        assert!(got.contains("avoid using pronouns like 'it', 'he', 'she', 'this', 'that'"));
        assert!(got.ends_with("France won the final.\n\n1. "));
    }

    #[test]
    fn skip_prompt_offers_skip() {
        let got = fact_gen_prompt(
            "the recent 2023 Superbowl LVII",
            "The game was close.",
            true,
        );
        assert!(got.contains("you may reply with \"SKIP\" and be done."));
        assert!(got.ends_with("FACT: The game was close.\n1. "));
    }

    #[test]
    fn noskip_prompt_has_no_skip_option() {
        let got = fact_gen_prompt(
            "the recent 2023 Superbowl LVII",
            "The game was close.",
            false,
        );
        assert!(!got.contains("SKIP"));
        assert!(got.ends_with("1. Q: sample question A: sample answer \n2. "));
    }

    #[test]
    fn grading_prompt_is_binary() {
        let got = grading_prompt("Who won?", "India.", "India won the final.");
        assert!(got.contains(
            "Your grading is binary: give 0 if the sentence is incorrect, give 1 if the sentence is correct."
        ));
        assert!(got.contains("The sentence is \"India won the final..\""));
    }

    #[test]
    fn unknown_placeholders_survive() {
        assert_eq!(render("a {kept} b", &[("other", "x")]), "a {kept} b");
    }
}

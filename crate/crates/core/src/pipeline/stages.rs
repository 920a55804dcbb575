//! Single pipeline stages. Each one renders a template, calls the providers
//! and returns validated values; none of them touches a session.

use super::{bindings, PipelineOutcome, Run};
use crate::error::{Error, Result};
use crate::model::{
    BlockOrigin, EchoSummary, EnrichmentState, EvidenceItem, IdCounter, InspirationBlock, InspirationTheme, JokeMap,
    TopicBrief, TopicSummary,
};
use crate::prompt::builtin::{
    blocks_schema, echo_schema, joke_draft_schema, keywords_schema, themes_schema, topic_summary_schema, BLOCKS, ECHO,
    JOKE_DRAFT, KEYWORDS, THEMES, TOPIC_SUMMARY,
};
use crate::prompt::SchemaError;

/// Title, setup and punchline of a drafted joke.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Draft {
    pub title: String,
    pub setup: String,
    pub punchline: String,
}

fn bullet_list<'a>(items: impl IntoIterator<Item = &'a str>) -> String {
    let lines: Vec<String> = items.into_iter().map(|s| format!("- {s}")).collect();
    if lines.is_empty() {
        "(none)".to_owned()
    } else {
        lines.join("\n")
    }
}

fn format_supplements(brief: &TopicBrief) -> String {
    let mut items: Vec<String> = brief.supplements.iter().map(|s| s.trim().to_owned()).collect();
    if let Some(a) = brief.audience_hint.as_deref().map(str::trim).filter(|a| !a.is_empty()) {
        items.push(format!("Audience: {a}"));
    }
    bullet_list(items.iter().filter(|s| !s.is_empty()).map(String::as_str))
}

pub fn format_summary(summary: &TopicSummary) -> String {
    format!(
        "Theme: {}\nAudience: {}\nStyle: {}\nTechniques: {}\nSummary: {}",
        summary.theme,
        summary.audience,
        summary.style,
        summary.techniques.join(", "),
        summary.raw_text
    )
}

fn format_theme(theme: &InspirationTheme) -> String {
    if theme.rationale.is_empty() {
        theme.label.clone()
    } else {
        format!("{}: {}", theme.label, theme.rationale)
    }
}

fn format_evidence(evidence: &[EvidenceItem]) -> String {
    evidence
        .iter()
        .enumerate()
        .map(|(i, e)| format!("[{}] {} ({})\n{}", i + 1, e.title, e.url, e.snippet))
        .collect::<Vec<_>>()
        .join("\n")
}

fn format_audience(summary: &TopicSummary) -> String {
    format!("{}; {}", summary.audience, summary.style)
}

pub fn summarize(run: &Run, brief: &TopicBrief) -> Result<PipelineOutcome<TopicSummary>> {
    let b = bindings([("topic", brief.topic.trim().to_owned()), ("supplements", format_supplements(brief))]);
    run.structured(TOPIC_SUMMARY, b, &topic_summary_schema(), |r| {
        Ok(TopicSummary {
            theme: r.text("theme").unwrap_or_default().to_owned(),
            audience: r.text("audience").unwrap_or_default().to_owned(),
            style: r.text("style").unwrap_or_default().to_owned(),
            techniques: r.text_list("techniques").unwrap_or_default().to_vec(),
            raw_text: r.text("summary").unwrap_or_default().to_owned(),
            confirmed: false,
        })
    })
}

/// Derives `count` themes whose labels differ from each other and from
/// `exclusions` (case-insensitive). Ids are assigned from `ids`.
pub fn derive_themes(
    run: &Run,
    summary: &TopicSummary,
    exclusions: &[String],
    count: usize,
    ids: &mut IdCounter,
) -> Result<PipelineOutcome<Vec<InspirationTheme>>> {
    let schema = themes_schema(count);
    let b = bindings([
        ("summary", format_summary(summary)),
        ("theme_count", count.to_string()),
        ("exclusions", bullet_list(exclusions.iter().map(String::as_str))),
    ]);
    let excluded: Vec<String> = exclusions.iter().map(|e| e.trim().to_lowercase()).collect();
    let outcome = run.structured(THEMES, b, &schema, |r| {
        let records = r.records("themes").unwrap_or_default();
        let mut out = Vec::with_capacity(records.len());
        for (i, rec) in records.iter().enumerate() {
            let label = rec.text("label").unwrap_or_default().to_owned();
            if excluded.contains(&label.to_lowercase()) {
                return Err(SchemaError::violated(&schema.name, format!("themes[{i}].label"), "distinct from existing themes"));
            }
            out.push((label, rec.text("rationale").unwrap_or_default().to_owned()));
        }
        Ok(out)
    })?;
    Ok(outcome.map(|pairs| {
        pairs
            .into_iter()
            .map(|(label, rationale)| InspirationTheme {
                id: ids.theme(),
                label,
                rationale,
            })
            .collect()
    }))
}

/// Keywords for `theme`, deduplicated in order of first occurrence.
pub fn expand_keywords(
    run: &Run,
    summary: &TopicSummary,
    theme: &InspirationTheme,
) -> Result<PipelineOutcome<Vec<String>>> {
    let b = bindings([("summary", format_summary(summary)), ("theme", format_theme(theme))]);
    run.structured(KEYWORDS, b, &keywords_schema(), |r| {
        let mut out: Vec<String> = Vec::new();
        for k in r.text_list("keywords").unwrap_or_default() {
            if !out.contains(k) {
                out.push(k.clone());
            }
        }
        Ok(out)
    })
}

pub fn distill(
    run: &Run,
    summary: &TopicSummary,
    theme: &InspirationTheme,
    evidence: &[EvidenceItem],
    count: usize,
) -> Result<PipelineOutcome<Vec<String>>> {
    let b = bindings([
        ("summary", format_summary(summary)),
        ("theme", format_theme(theme)),
        ("evidence", format_evidence(evidence)),
        ("block_count", count.to_string()),
    ]);
    run.structured(BLOCKS, b, &blocks_schema(count), |r| {
        Ok(r.text_list("blocks").unwrap_or_default().to_vec())
    })
}

pub fn echo(run: &Run, summary: &TopicSummary, text: &str, evidence: &[EvidenceItem]) -> Result<PipelineOutcome<String>> {
    let b = bindings([
        ("audience", format_audience(summary)),
        ("block", text.to_owned()),
        ("evidence", format_evidence(evidence)),
    ]);
    run.structured(ECHO, b, &echo_schema(), |r| Ok(r.text("echo").unwrap_or_default().to_owned()))
}

/// Splits search results over `blocks` blocks round-robin in distillation
/// order. When there are fewer results than blocks, each empty bucket `j`
/// borrows result `j mod R` so that every block stays grounded.
pub fn partition_evidence(items: &[EvidenceItem], blocks: usize) -> Vec<Vec<EvidenceItem>> {
    let mut buckets = vec![Vec::new(); blocks];
    if blocks == 0 {
        return buckets;
    }
    for (i, item) in items.iter().enumerate() {
        buckets[i % blocks].push(item.clone());
    }
    if !items.is_empty() {
        for (j, bucket) in buckets.iter_mut().enumerate() {
            if bucket.is_empty() {
                bucket.push(items[j % items.len()].clone());
            }
        }
    }
    buckets
}

/// Search, distill `count` blocks, partition evidence and echo each block.
/// Every returned block is AI-made and enriched at generation 1.
pub fn build_inspiration_pool(
    run: &Run,
    summary: &TopicSummary,
    theme: &InspirationTheme,
    keywords: &[String],
    count: usize,
    ids: &mut IdCounter,
) -> Result<PipelineOutcome<Vec<InspirationBlock>>> {
    let mut out = PipelineOutcome::new(());
    let evidence = out.absorb(run.search(keywords.to_vec())?);
    if evidence.is_empty() {
        return Err(Error::EmptyEvidence(theme.label.clone()));
    }
    let texts = out.absorb(distill(run, summary, theme, &evidence, count)?);
    let buckets = partition_evidence(&evidence, texts.len());
    let mut blocks = Vec::with_capacity(texts.len());
    for (text, evidence) in texts.into_iter().zip(buckets) {
        let echo_text = out.absorb(echo(run, summary, &text, &evidence)?);
        let id = ids.block();
        blocks.push(InspirationBlock {
            echo: Some(EchoSummary {
                block_id: id.clone(),
                text: echo_text,
                source_generation: 1,
            }),
            id,
            text,
            origin: BlockOrigin::Ai,
            evidence,
            enrichment_state: EnrichmentState::Enriched,
            generation: 1,
            revision: 0,
            annotation: None,
        });
    }
    Ok(out.map(|_| blocks))
}

/// Checks a map's pool can be drafted from.
pub fn check_draftable(map: &JokeMap) -> Result<()> {
    if map.pool.is_empty() {
        return Err(Error::EmptyPool(map.id.clone()));
    }
    if let Some(b) = map.pool.iter().find(|b| !b.is_enriched()) {
        return Err(Error::BlocksPending(b.id.clone()));
    }
    Ok(())
}

/// Drafts from the summary and the current pool only; earlier versions
/// are not shown to the model.
pub fn draft_joke(run: &Run, summary: &TopicSummary, map: &JokeMap) -> Result<PipelineOutcome<Draft>> {
    check_draftable(map)?;
    let theme = map
        .theme
        .as_ref()
        .map(format_theme)
        .unwrap_or_else(|| "(writer-defined; infer it from the blocks)".to_owned());
    let b = bindings([
        ("summary", format_summary(summary)),
        ("theme", theme),
        ("blocks", bullet_list(map.pool.iter().map(|b| b.text.as_str()))),
    ]);
    run.structured(JOKE_DRAFT, b, &joke_draft_schema(), |r| {
        Ok(Draft {
            title: r.text("title").unwrap_or_default().to_owned(),
            setup: r.text("setup").unwrap_or_default().to_owned(),
            punchline: r.text("punchline").unwrap_or_default().to_owned(),
        })
    })
}

/// One search plus one echo for a single block's text.
pub fn enrich(
    run: &Run,
    summary: &TopicSummary,
    text: &str,
    keywords: Vec<String>,
) -> Result<PipelineOutcome<(Vec<EvidenceItem>, String)>> {
    let mut out = PipelineOutcome::new(());
    let evidence = out.absorb(run.search(keywords)?);
    if evidence.is_empty() {
        return Err(Error::EmptyEvidence(text.to_owned()));
    }
    let echo_text = out.absorb(echo(run, summary, text, &evidence)?);
    Ok(out.map(|_| (evidence, echo_text)))
}

#[cfg(test)]
mod tests {
    use chrono::{TimeZone, Utc};

    use super::*;

    fn item(i: usize) -> EvidenceItem {
        EvidenceItem {
            url: format!("https://e/{i}"),
            title: format!("t{i}"),
            snippet: format!("s{i}"),
            retrieved_at: Utc.with_ymd_and_hms(2025, 1, 1, 0, 0, 0).unwrap(),
        }
    }

    #[test]
    fn partition_five_over_four() {
        let items: Vec<_> = (0..5).map(item).collect();
        let p = partition_evidence(&items, 4);
        let sizes: Vec<_> = p.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![2, 1, 1, 1]);
        assert_eq!(p[0][1].url, "https://e/4");
    }

    #[test]
    fn partition_single_block_takes_all() {
        let items: Vec<_> = (0..5).map(item).collect();
        let p = partition_evidence(&items, 1);
        assert_eq!(p, vec![items]);
    }

    #[test]
    fn partition_fewer_results_than_blocks_still_covers() {
        let items: Vec<_> = (0..2).map(item).collect();
        let p = partition_evidence(&items, 4);
        assert!(p.iter().all(|b| !b.is_empty()));
        assert_eq!(p[2][0].url, "https://e/0");
        assert_eq!(p[3][0].url, "https://e/1");
    }

    #[test]
    fn supplements_fold_audience_hint() {
        let mut brief = TopicBrief::new("t").with_supplements(["a", " "]);
        assert_eq!(format_supplements(&brief), "- a");
        brief.audience_hint = Some("office workers".into());
        assert_eq!(format_supplements(&brief), "- a\n- Audience: office workers");
        assert_eq!(format_supplements(&TopicBrief::new("t")), "(none)");
    }
}

//! Context and query prompt text.

use super::{RatingMode, RatingQuery};

const ROLE_INTERACTION: &str = "You will mimic a participant of a survey in which participants had to rate the suitability of Mixed Reality layouts that overlay User Interfaces onto parts of the real world. Thus, you will rate the suitability of directly interacting with virtual UI elements that you imagine be placed on each highlighted area of an image.All virtual elements would only be visible to you, not to other people in the image. All virtual elements would not obstruct the view of other people or light. The people you can see in the image are someone else, not yourself. You will rate the suitability of each area on a score that ranges from 1 to 5 where 1 means 'unsuitable', 2 means 'somewhat unsuitable', 3 means 'neutral',  4 means 'somewhat suitable' and 5 means 'suitable'.";

const INTERACTION_PHRASE: &str = "rate the suitability of directly interacting with virtual UI elements";
const OVERLAY_PHRASE: &str = "rate the suitability of overlaying virtual UI elements";

const REASONS: &str = "You will be asked to give the primary reason for your choice of suitability. Optional reasons are: functionality, social, health & safety, aesthetics, and other. Functionality means: the UI element hinders the functionality of the physical object. Social acceptability means: looking at or interacting with the UI element would be socially inappropriate. Health & Safety means: the UI element occludes safety critical information or may lead to sanitation issues during interaction. Aesthetics means: the UI element impairs the visual appeal of the physical surroundings. Other means: your primary reason is not covered in the list above.";

const FEW_SHOT_INTRO: &str = "To improve your ability to imitate a participant, you will be shown images they have evaluated and receive information about the median and standard deviation of their ratings for the highlighted areas of these images. Please take these ratings into account when judging new images.";

pub const MONITOR_REFINEMENT: &str = "When a monitor displays content, overlaying a virtual element on top of it is unsuitable.";

pub const RESPONSE_FORMAT: &str = "Area <area index>: <score>, <reason>";

/// Role and scale paragraph, reason definitions and the few-shot preface.
pub fn context_text(mode: RatingMode) -> String {
    let role = match mode {
        RatingMode::Interaction => ROLE_INTERACTION.to_string(),
        RatingMode::Overlay => ROLE_INTERACTION.replace(INTERACTION_PHRASE, OVERLAY_PHRASE),
    };
    [role.as_str(), REASONS, FEW_SHOT_INTRO].join("\n\n")
}

fn suitability_name(mode: RatingMode) -> &'static str {
    match mode {
        RatingMode::Overlay => "overlay suitability",
        RatingMode::Interaction => "direct interaction suitability",
    }
}

/// One few-shot block: per-area median with one decimal, SD with two.
pub fn few_shot_block(mode: RatingMode, areas: &[(f64, f64)]) -> String {
    let mut s = format!(
        "Participants of a survey provided the following median responses along with standard deviations for the {} of the areas in this image:",
        suitability_name(mode)
    );
    for (i, (median, sd)) in areas.iter().enumerate() {
        s.push_str(&format!(" area {}: median {:.1}, standard deviation {:.2};", i + 1, median, sd));
    }
    s
}

/// Full context prompt for a query. Few-shot images travel as attachments
/// in the same order as their blocks.
pub fn build_context_prompt(query: &RatingQuery) -> String {
    let mut parts = vec![context_text(query.mode)];
    for ex in &query.few_shot {
        let areas: Vec<(f64, f64)> = ex.areas.iter().map(|a| (a.median, a.sd)).collect();
        parts.push(few_shot_block(query.mode, &areas));
    }
    if query.monitor_refinement {
        parts.push(MONITOR_REFINEMENT.to_string());
    }
    parts.join("\n\n")
}

/// The rating question for the unseen image plus the answer format.
pub fn build_query_prompt(mode: RatingMode) -> String {
    let question = match mode {
        RatingMode::Overlay => "Please rate the suitability of overlaying a virtual UI element on each area in this image.",
        RatingMode::Interaction => "Please rate the suitability of directly interacting with virtual UI elements displayed in each area. Note: All virtual elements are positioned within your arm's reach. If a virtual element covers a physical object, interacting with it means physically touching that object.",
    };
    format!("{question}\nAnswer with one line per area in the format: {RESPONSE_FORMAT}")
}

//! Prompt templates for the localization, merged localization+instruction,
//! answering and relevance-evaluator roles.

use std::collections::BTreeSet;

use super::ProtocolError;
use crate::memory::{MemoryList, TimePeriod};

/// Fixed captioning instruction for question-independent coarse memory.
pub const COARSE_CAPTION_INSTRUCTION: &str = "Please observe and understand the given video carefully. Describe all the details of this video as comprehensively as possible in a smooth and coherent passage. Do not omit any details or prominent information. In addition, if there are any texts, subtitles, text overlays, or voice-overs in the video, you must explicitly and in detail describe them.";

/// Phrases that identify each template in a rendered prompt.
pub const INIT_LOCALIZATION_SENTINEL: &str =
    "determine whether the given question allows me to provide a more confident answer";
pub const LOCATE_SENTINEL: &str = "Your second task is to consider what detailed content";
pub const ANSWER_SENTINEL: &str =
    "determine whether you can accurately answer the given question solely based on the currently provided descriptions";
pub const FORCED_SENTINEL: &str = "This is the final round of observation.";
pub const RELEVANCE_SENTINEL: &str = "Score the relevance on a scale of 1 to 5";

pub const INIT_LOCALIZATION_SCHEMA: &str = r#"{"Flag": True or False, "Time Period": [(start time, end time), ...] or "No Time Periods", "Reason": "..."}"#;
pub const LOCATE_SCHEMA: &str =
    r#"{"Time Period": [(start time, end time)], "Instruction": "...", "Reason": "..."}"#;
pub const ANSWER_SCHEMA: &str = r#"{"Confidence": True or False, "Answer": "..." or "No Answer", "Time Period": [(start time, end time), ...] or "No Time", "Reason": "..."}"#;

/// English word for small counts, digits otherwise.
pub fn number_word(n: usize) -> String {
    const WORDS: [&str; 11] = [
        "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    ];
    WORDS
        .get(n)
        .map_or_else(|| n.to_string(), |w| (*w).to_owned())
}

fn check_inputs(cm: &MemoryList, question: &str) -> Result<(), ProtocolError> {
    if question.trim().is_empty() {
        return Err(ProtocolError::Template("question is empty".into()));
    }
    if cm.is_empty() {
        return Err(ProtocolError::Template(
            "current memory list is empty".into(),
        ));
    }
    Ok(())
}

pub fn render_init_localization_prompt(
    cm: &MemoryList,
    question: &str,
    relevant_count: usize,
) -> Result<String, ProtocolError> {
    check_inputs(cm, question)?;
    let n = number_word(relevant_count);
    Ok(format!(
        r#"The following provides a rough description of what's shown in the video during different time periods:

{memory}

Now, a question has been raised regarding this video.

{question}

Please read the given video content descriptions and the question in depth.

Since most of these descriptions are rather rough and some detailed information is lost, my task is to try my best to find the time periods related to the given question, and then provide more detailed descriptions of the video content of these time periods.

In order to assist me in completing my task, your task is to:

Based on the provided rough video descriptions, determine whether the given question allows me to provide a more confident answer by further observing the video content of {n} time periods.

If so, you should find out the time periods related to the question as much as possible and provide these relevant time periods so that I can review the content information of these video segments again to obtain more information and answer the question better.

For example, since there is no need for an overall understanding of large video segments, the following questions can obtain more accurate answers by re-observing the video segments of {n} time periods:

(i) What color is Putin's tie between the interview with Antony Blinkoen and interview with Marie Yovanovitch?

(ii) How does the goalkeeper prevent Liverpool's shot from scoring at 81:38 in the video?

(iii) Who smashes the magic mirror?

On the contrary, for example, because an overall understanding of large video segments is required, it is difficult to obtain more accurate answers to the following questions by merely observing two video segments:

(i) What happens in the second half of the game?

(ii) What is the video about?

(iii) Which places has the protagonist of this video been to in total?

You should output in a strictly standardized dictionary format containing three key-value pairs:

"Flag": A bool. If you are very confident that you can provide the time periods according to the above requirements, set it as True. Otherwise, set it as False.

"Time Period": A list. If "Flag" is True, fill in the list with the most relevant {n} time periods, in the tuple format (start time, end time). If "Flag" is False, fill in "No Time Periods."

"Reason": A String. Show me your reasons for the time periods you provided.
"#,
        memory = cm.render_for_prompt(),
    ))
}

fn render_explored(explored: &BTreeSet<TimePeriod>) -> String {
    if explored.is_empty() {
        return "(none)".to_owned();
    }
    explored
        .iter()
        .map(|p| format!("({}, {})", p.start_s(), p.end_s()))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn render_locate_and_instruct_prompt(
    cm: &MemoryList,
    question: &str,
    explored: &BTreeSet<TimePeriod>,
    duration_s: u64,
) -> Result<String, ProtocolError> {
    check_inputs(cm, question)?;
    Ok(format!(
        r#"There is currently a video with a total duration of {duration_s} seconds.

The following gives a general description of what is shown in the video during certain time periods:

{memory}

Now, a question has been raised regarding this video.

{question}

Please read the given video content descriptions and the question in depth.

You do not need to answer this question.

Your first task is to identify, based on the video content in each time period, the single time period that is most relevant to the question and that you think requires further elaboration of its video content details to make the answer to this question more explicit.

Notably, you need to select the most relevant one from the time periods other than the following time periods:

{explored}

In addition, assume there is now a caption model that can describe a given video according to your instruction.

Your second task is to consider what detailed content in the video of the time period you have selected you want the model to focus on describing, and provide your instruction.


For example, assume that the entire video segment is about an offensive play in a certain football game, and you want to focus on the passing situation of the football during this offensive play. The instruction you give to the model could be:


Please observe all the details in this video very carefully and provide a detailed and objective description of what is shown in the video. If this video is about an offensive play in a football match, you should focus particularly on the passing situation of the football during this offensive play.

Note that you should organize your instruction by referring to the language expressions in the above example.

You should output in a strictly standardized dictionary format containing three key-value pairs:

"Time Period": A list. Fill with the single most relevant period, in the tuple format (start time, end time).

"Instruction": A String. This string must be enclosed in double quotes. Show me the instruction you want to give to the caption model for the second task.

"Reason": A String. This string must be enclosed in double quotes. Show me your reasons for the time period and instruction you provided.
"#,
        memory = cm.render_for_prompt(),
        explored = render_explored(explored),
    ))
}

pub fn render_answer_prompt(
    cm: &MemoryList,
    question: &str,
    duration_s: u64,
    force: bool,
) -> Result<String, ProtocolError> {
    check_inputs(cm, question)?;
    let mut prompt = format!(
        r#"There is currently a video with a total duration of {duration_s} seconds.

The following gives a general description of what is shown in the video during certain time periods:

{memory}

Now, a question has been raised regarding the content descriptions of this video.

{question}

Please read the given video content descriptions and the question in depth, and determine whether you can accurately answer the given question solely based on the currently provided descriptions.

If you can answer it with absolute confidence, please answer this question and provide the time periods of the video content you are referring to. The answer you provide must have completely and absolutely objective support in the video descriptions. Do not make inferences arbitrarily.

If you think the current content descriptions of the video are still insufficient to accurately answer the question, please do not answer it and give me your reason.

Please output in a strictly standardized dictionary format containing four key-value pairs:

"Confidence": A boolean value. Set it to True if you are certain about the answer, and False if not.

"Answer": A string. This string must be enclosed in double quotes. When "Confidence" is True, fill in the answer content; when "Confidence" is False, fill in "No Answer".

"Time Period": A list. When "Confidence" is True, fill in the list with time periods corresponding to the answer, each in the format of a tuple (start time, end time); when "Confidence" is False, fill in "No Time".

"Reason": A String. This string must be enclosed in double quotes. Show me your reasoning about your judgment. You need to ensure and check that your reasoning must be able to absolutely support your answer.
"#,
        memory = cm.render_for_prompt(),
    );
    if force {
        prompt.push_str(
            r#"
This is the final round of observation. No further video content can be described, so you must not abstain. Choose the best answer you can based on the descriptions above, even if some uncertainty remains. Set "Confidence" to True, fill in "Answer" with your best answer, and fill in "Time Period" with the time periods that support it most.
"#,
        );
    }
    Ok(prompt)
}

pub fn render_relevance_prompt(text: &str, question: &str) -> String {
    format!(
        r#"Please complete the following task:
Carefully analyze the given Text and Question.
Determine whether the Text contains descriptions or information relevant to the Question. Score the relevance on a scale of 1 to 5 based on the following criteria:
1 point: The Text has no relevance to the Question, and there is no content related to the Question in the Text at all.
2 points: The Text has a very weak relevance to the Question, with only a minimal amount of unrelated indirect descriptions.
3 points: The Text has some relevance to the Question, containing some relevant information, but it is not comprehensive or in-depth enough.
4 points: The Text has a relatively strong relevance to the Question, containing a substantial amount of relevant information and being able to respond to the Question fairly well.
5 points: The Text is highly relevant to the Question, fully and thoroughly covering all the key information required by the Question.
Output the final score in the format of "Scoring result: X points", where X is an integer between 1 and 5.
Given Text: {text}
Given Question: {question}
"#
    )
}

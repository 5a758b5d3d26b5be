//! The seven shipped prompt templates and slot substitution.
//!
//! Template text is kept byte-for-byte as distributed; the golden files under
//! `tests/golden/prompts` pin it.

use serde::{Deserialize, Serialize};

/// Slot filled with the user's text.
pub const USER_QUERY_SLOT: &str = "{user-query}";
/// Slot filled with the question under analysis.
pub const QUESTION_SLOT: &str = "{question-statement}";

const SLOTS: [&str; 2] = [USER_QUERY_SLOT, QUESTION_SLOT];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Answer,
    BetterAnswer,
    Followups,
    RecentFilter,
    TrendingRate,
    Rephrase,
    PrefetchAnswer,
}

impl Task {
    pub const ALL: [Task; 7] = [
        Task::Answer,
        Task::BetterAnswer,
        Task::Followups,
        Task::RecentFilter,
        Task::TrendingRate,
        Task::Rephrase,
        Task::PrefetchAnswer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::Answer => "answer",
            Task::BetterAnswer => "better_answer",
            Task::Followups => "followups",
            Task::RecentFilter => "recent_filter",
            Task::TrendingRate => "trending_rate",
            Task::Rephrase => "rephrase",
            Task::PrefetchAnswer => "prefetch_answer",
        }
    }

    pub fn template(self) -> &'static PromptTemplate {
        &TEMPLATES[self as usize]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub task: Task,
    pub system_text: &'static str,
    pub user_template: &'static str,
}

impl PromptTemplate {
    /// Substitutes every slot with `text` in one left-to-right pass, so slot
    /// markers inside `text` are never expanded.
    pub fn fill(&self, text: &str) -> String {
        let mut out = String::with_capacity(self.user_template.len() + text.len());
        let mut rest = self.user_template;
        while let Some((pos, slot)) = SLOTS
            .iter()
            .filter_map(|s| rest.find(s).map(|p| (p, *s)))
            .min_by_key(|(p, _)| *p)
        {
            out.push_str(&rest[..pos]);
            out.push_str(text);
            rest = &rest[pos + slot.len()..];
        }
        out.push_str(rest);
        out
    }

    /// Recovers the substituted text from a prompt produced by [`fill`](Self::fill).
    pub fn extract(&self, filled: &str) -> Option<String> {
        let (pos, slot) = SLOTS
            .iter()
            .filter_map(|s| self.user_template.find(s).map(|p| (p, *s)))
            .min_by_key(|(p, _)| *p)?;
        let prefix = &self.user_template[..pos];
        let after = &self.user_template[pos + slot.len()..];
        // literal text up to the next slot (or the end) delimits the value
        let delim_end = SLOTS
            .iter()
            .filter_map(|s| after.find(s))
            .min()
            .unwrap_or(after.len());
        let delim = &after[..delim_end];
        let body = filled.strip_prefix(prefix)?;
        if delim.is_empty() {
            return Some(body.to_string());
        }
        body.find(delim).map(|end| body[..end].to_string())
    }
}

pub static TEMPLATES: [PromptTemplate; 7] = [
    PromptTemplate {
        task: Task::Answer,
        system_text: ANSWER_SYSTEM,
        user_template: ANSWER_USER,
    },
    PromptTemplate {
        task: Task::BetterAnswer,
        system_text: BETTER_ANSWER_SYSTEM,
        user_template: BETTER_ANSWER_USER,
    },
    PromptTemplate {
        task: Task::Followups,
        system_text: FOLLOWUPS_SYSTEM,
        user_template: FOLLOWUPS_USER,
    },
    PromptTemplate {
        task: Task::RecentFilter,
        system_text: RECENT_FILTER_SYSTEM,
        user_template: RECENT_FILTER_USER,
    },
    PromptTemplate {
        task: Task::TrendingRate,
        system_text: TRENDING_RATE_SYSTEM,
        user_template: TRENDING_RATE_USER,
    },
    PromptTemplate {
        task: Task::Rephrase,
        system_text: REPHRASE_SYSTEM,
        user_template: REPHRASE_USER,
    },
    PromptTemplate {
        task: Task::PrefetchAnswer,
        system_text: PREFETCH_ANSWER_SYSTEM,
        user_template: PREFETCH_ANSWER_USER,
    },
];

pub const ANSWER_SYSTEM: &str = r#"Instructions

You are an advanced AI assistant designed to provide informative and helpful responses to a wide range of queries.

Your responses should be clear and concise, adhering to the following guidelines:

1. You can use the context provided but only to get the information needed to address the user's current message.
2. No need to follow the length of responses, verbosity etc. of the messages in the context.
3. Engage in a conversational manner and use humor if applicable.
4. Your responses should be visually appealing for WhatsApp users, so use emojis, short paragraphs, etc."#;

pub const ANSWER_USER: &str = r#"{user-query}"#;

pub const BETTER_ANSWER_SYSTEM: &str = r#"Instructions

You are an advanced AI assistant designed to provide informative and helpful responses to a wide range of queries.

Your response should be detailed and thoughtful and go beyond simply answering the user's query.

1. You can use the context provided but only to get the information needed to address the user's current message.
2. No need to follow the length of responses, verbosity etc. of the messages in the context.
3. Engage in a conversational manner and use humor if applicable.
4. Your responses should be visually appealing for WhatsApp users, so use emojis, short paragraphs, etc."#;

pub const BETTER_ANSWER_USER: &str = r#"{user-query}"#;

pub const FOLLOWUPS_SYSTEM: &str = r#"Instructions

You are given a user's query and the original response from a chatbot.

Your task is to formulate 6 follow-up questions that THE USER CAN ASK further based on things the response hasn't covered. These questions should pique the user's interest, with the goal to make them want to keep using the chatbot.

Question 1 and 2 must dig deep into the topic of the given query, focusing on some specific detail or aspect of it.
Question 3 and 4 must focus on a different but closely related topic to the topic of the given query.
Question 5 and 6 must be on a completely new topic that is loosely tied with the topic of the given query.

Format Instructions

You must adhere to the following:
1. Each question should be concise, ideally 1 sentence long.
2. Each question statement should be visually appealing for WhatsApp users, so you must use emojis in the question statement.
3. Strictly respond in the following JSON format: {"q1": "question statement", "q2": "question statement", "q3": "question statement", "q4": "question statement", "q5": "question statement", "q6": "question statement"}"#;

pub const FOLLOWUPS_USER: &str = r#"{user-query}"#;

pub const RECENT_FILTER_SYSTEM: &str = r#"Instructions

You are an advanced AI designed to help the user improve and analyse language usage."#;

pub const RECENT_FILTER_USER: &str = r#"Statement: {user-query}

Above, you are provided with a statement by a user. DO NOT ATTEMPT TO ANSWER IT. Perform the following analysis on it:

1. Return None if the statement is not a question statement.
2. Return None if the question statement is in any language other than English.
3. Return None if the question statement refers to any object/idea/thing/text etc. that is not explicitly defined within the question statement.
4. Convert it to a SINGLE question statement.
5. Fix any typos in it and make it less than 125 words.
6. Add a relevant emoji to it to make it visually appealing.

ONLY return None or the rephrased question statement."#;

pub const TRENDING_RATE_SYSTEM: &str = r#"Instructions

You are an advanced AI data analyst designed to help the user analyze user questions."#;

pub const TRENDING_RATE_USER: &str = r#"{user-query}
I am providing a criteria to you to rate questions. Assign a binary score (0/1) for the provided question for each criteria point. 1 indicates the question meets the criteria point, while 0 indicates that it does not. There are a total of 10 criteria points. The question is: {question-statement}. The criteria is:

criteria_1 [In English]: Question is written in the English language.
criteria_2 [Independent]: The question does not refer to any object/idea/thing/text etc. that is not explicitly defined within the query statement.
criteria_3 [General Interest Topics]: Question is about a widely recognized subject such as common products, health, finance, technology, education, entertainment, or current events.
criteria_4 [Recurring Themes]: Question touches on common human experiences or needs, such as relationship or career advice, general guidance, parenting, hobbies or personal growth.
criteria_5 [Intellectually Stimulating]: Question is intellectually stimulating.
criteria_6 [Funny But Interesting]: Question is funny but poses an interesting question at the same time.
criteria_7 [Curiosity]: Question is interesting and will likely pique one's curiosity.
criteria_8 [Life Stages and Milestones]: Question is about life events that most people go through, such as schooling, starting a job, marriage, retirement, etc.
criteria_9 [Problem-Solving Orientation]: Question is around solving a common problem or dealing with a situation that many might face, regardless of demographic.
criteria_10 [Broadly Applicable Advice]: Question is on asking for advice or recommendations which could be useful for a wide range of people, not limited by geography, age, or occupation.

Your response should only contain comma-separated scores for each criteria point 1-10 in the same order: score1,score2,score3,score4,...,score10"#;

pub const REPHRASE_SYSTEM: &str = r#"Instructions
You are an advanced AI designed to help the user rephrase question statements."#;

pub const REPHRASE_USER: &str = r#"{question-statement}

You are provided with a question statement. Rephrase the question following this criteria:

1. Fix any typos or punctuation errors.
2. Add one emoji to the question statement to make it visually appealing.
3. Do NOT answer the question and do NOT add unnecessary details to the question statement.
4. ONLY if the question is longer than 150 words, shorten it.

Strictly return ONLY the rephrased question."#;

pub const PREFETCH_ANSWER_SYSTEM: &str = r#"Instructions

You are an advanced AI assistant designed to provide informative and helpful responses to a wide range of queries.

Your responses should be clear and concise.

Format Instructions

1. If the query can be answered concisely, do not be verbose. For example, factual queries can be answered in a few sentences.
2. Engage in a conversational manner and use humor if applicable.
3. Your responses should be visually appealing for WhatsApp users, so use emojis, short paragraphs, etc."#;

pub const PREFETCH_ANSWER_USER: &str = r#"{user-query}"#;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_is_indexed_by_task() {
        for task in Task::ALL {
            assert_eq!(task.template().task, task);
        }
    }

    #[test]
    fn fill_is_total() {
        for task in Task::ALL {
            let filled = task.template().fill("Why is the sky blue?");
            assert!(!filled.contains(USER_QUERY_SLOT));
            assert!(!filled.contains(QUESTION_SLOT));
            assert!(filled.contains("Why is the sky blue?"));
        }
    }

    #[test]
    fn fill_does_not_expand_injected_slots() {
        let t = Task::TrendingRate.template();
        let filled = t.fill("a {question-statement} b");
        assert_eq!(filled.matches("a {question-statement} b").count(), 2);
    }

    #[test]
    fn extract_round_trips() {
        for task in Task::ALL {
            let t = task.template();
            let q = "How do I\nfix a flat tyre?";
            assert_eq!(t.extract(&t.fill(q)).as_deref(), Some(q), "{task:?}");
        }
    }
}

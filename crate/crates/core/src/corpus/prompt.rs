//! Prompt assembly for batched instance generation.
//!
//! A prompt has four sections: setup, criteria, examples and chain-of-thought
//! instructions. `BATCH_SIZE` and `START_INDEX` placeholders in the
//! chain-of-thought section are filled per request.

use alloc::format;
use alloc::string::{String, ToString};

use crate::{Error, Result};

const SETUP: &str = "A Winograd schema sentence is a sentence that contains an ambiguity and requires \
world knowledge and reasoning for its resolution. For example: The city councilmen refused the \
demonstrators a permit because they feared violence.\n\
Here, \"they\" presumably refers to the city council; because city councils are typically responsible \
for maintaining order and avoiding violence in their city. It is more plausible that a city council \
would fear violence than actively advocate for it. In this example we get the answer based on our \
world knowledge that tells us city councils generally wish to preserve order, while protest movements \
sometimes embrace confrontation and violence to achieve political aims. This matches the logical \
referents in the schema.";

/// The five structural rules every generated sentence must satisfy.
pub const CRITERIA_RULES: [&str; 5] = [
    "1. Be easily disambiguated by the reader;",
    "2. Not be solvable by simple techniques such as selectional restrictions;",
    "3. The \"snippet\" must directly refer to the entity specified by the \"answer\"",
    "4. Neither of the \"options\" should be found in the \"snippet\".",
    "5. The \"pronoun\" must be applicable to both \"options\". For example, two men could share the \
pronoun \"he\" or \"him\". Furthermore, a person with an occupation such as an athlete or doctor and a \
non-human entity cannot share the pronouns \"he\" or \"she\" but may share \"it\". If a plural pronoun \
is used such as \"they\" then both \"options\" should also be plural. For example, coaches instead of \
coach and players instead of player.",
];

const EXAMPLES_HEAD: &str = "Here is an example of some sentences which match the format of the \
Winograd schema:\n(using output with reason examples)";

const SEED_PLACEHOLDER: &str = "INSERT WSC SAMPLES";

const INVALID_EXAMPLES: &str = r#"An example of an invalid pair is:
The athlete left the game because it was [risky/exhausting].
a:
{"statement": "The athlete left the game because it was risky.",
"pronoun": "it",
"snippet": "it was risky",
"options": ["athlete", "game"],
"answer": 1,
"reason": "If 'risky' is used, it implies the game was risky, causing the athlete to leave."}
b:
{"statement": "The athlete left the game because it was exhausting.",
"pronoun": "it",
"snippet": "it was exhausting",
"options": ["athlete", "game"],
"answer": 0,
"reason": "If 'exhausting' is used, it implies the athlete was exhausted, causing him to leave the game."}
Explanation: The "snippet" refers to the game's impact on the athlete when it should refer to the "athelete" itself. To correct this sample, the term used should be exhausted instead of exhausting.

Another example of an invalid pair is:
The boy kicked the ball because it was [deflated/inflated].
a:
{"statement": "The boy kicked the ball because it was deflated.",
"pronoun": "it",
"snippet": "it was deflated",
"options": ["the boy", "the ball"],
"answer": 1,
"reason": "If 'deflated' is used, it implies the ball was deflated."}
b:
{"statement": "The boy kicked the ball because it was inflated.",
"pronoun": "it",
"snippet": "it was inflated",
"options": ["the boy", "the ball"],
"answer": 1,
"reason": "If 'inflated' is used, it implies the ball was inflated, prompting the boy to kick it."}
Explanation: In a Pair, a and b must not have the same "answer". If Pair2.a's "answer" is 0, Pair2.b's "answer" should be 1 and vice-versa."#;

/// Seed samples used when the caller supplies none.
pub const DEFAULT_SEED_SAMPLES: &str = r#"{"statement": "The thief stole the diamond because it was valuable.",
"pronoun": "it",
"snippet": "it was valuable",
"options": ["thief", "diamond"],
"answer": 1,
"reason": "If 'valuable' is used, it implies the diamond was valuable, which is why the thief stole it."}
{"statement": "The man carried the child because he was tired.",
"pronoun": "he",
"snippet": "he was tired",
"options": ["man", "child"],
"answer": 1,
"reason": "A tired child is carried by an adult, so 'he' refers to the child."}"#;

const COT: &str = "Without skipping any, come up with BATCH_SIZE new valid sentences starting at \
sentence START_INDEX. Think step by step for each new sentence by following these steps:\n\
1. Come up with two entities or objects which share a pronoun.\n\
2. Think of a pronoun that seems just as semantically compatible with the two antecedent options, but \
can be disambiguated using common sense reasoning and not at all with distributional cues between \
the antecedents and the rest of the sentence.\n\
3. Come up with a completely new sentence that follows the principles of the example sentences and \
follows the rules listed above.\n\
Repeat this process for all the sentences you generate. The sentences should be original and diverse \
in the topics that they cover.";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    setup: String,
    criteria: String,
    examples: String,
    cot: String,
    batch_size: usize,
}

impl PromptTemplate {
    pub fn new(
        setup: impl Into<String>,
        criteria: impl Into<String>,
        examples: impl Into<String>,
        cot: impl Into<String>,
        batch_size: usize,
    ) -> Result<Self> {
        let tmpl = Self {
            setup: setup.into(),
            criteria: criteria.into(),
            examples: examples.into(),
            cot: cot.into(),
            batch_size,
        };
        for (name, body) in [
            ("setup", &tmpl.setup),
            ("criteria", &tmpl.criteria),
            ("examples", &tmpl.examples),
            ("cot", &tmpl.cot),
        ] {
            if body.trim().is_empty() {
                return Err(Error::EmptyTemplateSection(name));
            }
        }
        if batch_size == 0 {
            return Err(Error::InvalidSample("batch size must be positive"));
        }
        Ok(tmpl)
    }

    /// The standard template with the given seed samples spliced into the
    /// examples section. An empty seed set is rejected.
    pub fn standard(seed_samples: &str, batch_size: usize) -> Result<Self> {
        if seed_samples.trim().is_empty() {
            return Err(Error::EmptyTemplateSection("examples"));
        }
        let mut criteria = String::from("Winograd schema sentences must abide by five rules:");
        for rule in CRITERIA_RULES {
            criteria.push('\n');
            criteria.push_str(rule);
        }
        let examples = format!("{EXAMPLES_HEAD}\n{SEED_PLACEHOLDER}\n{INVALID_EXAMPLES}")
            .replace(SEED_PLACEHOLDER, seed_samples.trim());
        Self::new(SETUP, criteria, examples, COT, batch_size)
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::InvalidSample("batch size must be positive"));
        }
        self.batch_size = batch_size;
        Ok(self)
    }
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self::standard(DEFAULT_SEED_SAMPLES, 10).expect("built-in template is complete")
    }
}

fn ordinal_word(n: usize) -> String {
    const WORDS: [&str; 21] = [
        "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven",
        "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen",
        "twenty",
    ];
    WORDS.get(n).map_or_else(|| n.to_string(), |w| String::from(*w))
}

/// Renders the full prompt for a batch starting at sentence `start_index`.
pub fn build_prompt(tmpl: &PromptTemplate, start_index: usize) -> String {
    let cot = tmpl
        .cot
        .replace("BATCH_SIZE", &tmpl.batch_size.to_string())
        .replace("START_INDEX", &ordinal_word(start_index));
    format!("{}\n\n{}\n\n{}\n\n{}", tmpl.setup, tmpl.criteria, tmpl.examples, cot)
}

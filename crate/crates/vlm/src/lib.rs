//! Multimodal scene assessment: fixed inspector prompts, a chat-completions
//! client, and keyword verdict parsing.

mod client;
mod error;
pub mod stub;
mod template;
mod verdict;

pub use client::{append_record, AssessmentRecord, Client, EndpointConfig, DEFAULT_CONCURRENCY, KEY_ENV};
pub use error::{Error, Result};
pub use template::{render_prompt, PromptTemplate, TemplateId, FLOOR_PROMPT, ORGANIZATION_PROMPT, TEMPLATES};
pub use verdict::{parse_verdict, Verdict};

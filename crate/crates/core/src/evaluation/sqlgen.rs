use crate::services::{GenerationRequest, GenerationResponse, Generator, ServiceError};

pub const SQL_MAX_TOKENS: u32 = 512;

/// Minimal text-to-SQL prompt over the retrieved schema: each table's
/// Markdown snapshot followed by the question.
pub fn sql_generation_prompt(question: &str, tables_markdown: &[String]) -> String {
    let mut prompt = String::from(
        "You are an expert SQLite developer. Using only the tables below, write one SQLite query that answers the question.\n\
         Return only the SQL, with no explanation.\n\n",
    );
    for (i, md) in tables_markdown.iter().enumerate() {
        prompt.push_str(&format!("Table {i}:\n{md}\n\n"));
    }
    prompt.push_str(&format!("Question: {question}\nSQL:"));
    prompt
}

/// Strips a Markdown code fence if present, then surrounding whitespace.
pub fn extract_sql(text: &str) -> String {
    let body = match text.find("```") {
        Some(start) => {
            let after = &text[start + 3..];
            let after = after.split_once('\n').map_or(after, |(lang, rest)| {
                if lang.trim().chars().all(|c| c.is_ascii_alphanumeric()) {
                    rest
                } else {
                    after
                }
            });
            after.split("```").next().unwrap_or(after)
        }
        None => text,
    };
    body.trim().to_string()
}

pub fn generate_sql(
    question: &str,
    tables_markdown: &[String],
    generator: &dyn Generator,
    seed: u64,
) -> Result<(String, GenerationResponse), ServiceError> {
    let mut request = GenerationRequest::new(sql_generation_prompt(question, tables_markdown), SQL_MAX_TOKENS);
    request.seed = seed;
    let response = generator.generate(&request)?;
    Ok((extract_sql(&response.text), response))
}

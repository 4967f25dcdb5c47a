//! Build prompts in both styles and show how the length budget trims them.
//!
//! ```not_rust
//! cargo run --example assemble_prompts
//! ```

use tabcap::prompt::{split_caption, PromptSpec, PromptStyle};

fn main() {
    let caption = [
        "The geometry of the air showers is fixed to a zenith angle of 50 degree coming from south.",
        "Each cell shows the mean of at least 20 air showers simulated with the same settings but different random seeds.",
        "The uncertainties shown are the uncertainty of the mean, and the standard deviation is shown in brackets.",
    ];
    let split = split_caption(&caption).expect("caption has a first sentence");
    println!("target: {}\n", split.rest);

    let tabular: Vec<String> = "refractivity at sea level normalized radiation energy n0 MeV"
        .split_whitespace()
        .map(String::from)
        .collect();
    let relevant = vec!["The radiation energy grows with the refractivity at the shower maximum.".to_string()];

    for style in PromptStyle::ALL {
        for max_length in [style.default_budget(), 24] {
            let spec = PromptSpec {
                tabular_tokens: tabular.clone(),
                relevant_sentences: relevant.clone(),
                first_caption_sentence: split.first.clone(),
                style,
                max_length,
            };
            match spec.render() {
                Ok(prompt) => println!("[{} / {max_length}] ({} words)\n{prompt}\n", style.code(),
                    prompt.split_whitespace().count()),
                Err(e) => println!("[{} / {max_length}] error: {e}\n", style.code()),
            }
        }
    }
}

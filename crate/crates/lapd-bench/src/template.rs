//! Commented config templates, one per experiment. The output parses back
//! through the config reader, so `--template --experiment X > x.conf`
//! followed by `--config x.conf` runs the documented defaults.

use anyhow::Result;

use crate::config::{canonical_experiment, csv_schema, experiment_blurb, experiment_keys};

/// Renders the template for one experiment, or fails with the list of valid
/// names.
pub fn render(experiment: &str) -> Result<String> {
    let experiment = canonical_experiment(experiment)?;
    let keys = experiment_keys(experiment).expect("canonical experiment has a key table");
    let schema = csv_schema(experiment).expect("canonical experiment has a CSV schema");

    let mut out = String::new();
    out.push_str(&format!("# lapd-bench config template: {experiment}\n#\n"));
    for line in wrap(experiment_blurb(experiment), 74) {
        out.push_str(&format!("# {line}\n"));
    }
    out.push_str("#\n");
    out.push_str(&format!("# CSV artifact: {experiment}.csv\n"));
    out.push_str(
        "#   first line: `# lapd-bench <version> <full resolved key=value config>`\n#   columns:\n",
    );
    let width = schema.iter().map(|(col, _)| col.len()).max().unwrap_or(0);
    for (col, doc) in schema {
        out.push_str(&format!("#     {col:width$}  {doc}\n"));
    }
    out.push_str("#\n# Lines starting with `#` are comments; values are `key = value`.\n");
    out.push_str(&format!("\n[{experiment}]\n"));
    for key in keys {
        out.push_str(&format!("# {}\n{} = {}\n", key.doc, key.key, key.default));
    }
    Ok(out)
}

fn wrap(text: &str, width: usize) -> Vec<String> {
    let mut lines = Vec::new();
    let mut current = String::new();
    for word in text.split_whitespace() {
        if !current.is_empty() && current.len() + 1 + word.len() > width {
            lines.push(std::mem::take(&mut current));
        }
        if !current.is_empty() {
            current.push(' ');
        }
        current.push_str(word);
    }
    if !current.is_empty() {
        lines.push(current);
    }
    lines
}

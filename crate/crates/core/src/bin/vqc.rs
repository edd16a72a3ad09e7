//! Command line front end: compile, validate, explain and run visual query
//! documents.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};

use vqc::client::{self, EndpointConfig, ResultFormat};
use vqc::diag::Diagnostics;
use vqc::generate::Params;
use vqc::schema::{load_schema, Schema};

#[derive(Parser)]
#[command(name = "vqc", version, about = "Visual query to SPARQL compiler")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CompileArgs {
    /// Query document (JSON).
    query: PathBuf,
    /// Data schema document (JSON).
    #[arg(long)]
    schema: PathBuf,
    /// Generation parameters (JSON); defaults apply when omitted.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Write output to this file instead of stdout.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Stage {
    Parse,
    Ast,
    Symbols,
    Model,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Table,
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a query document to SPARQL text.
    Compile(CompileArgs),
    /// Check a query document without generating SPARQL.
    Validate(CompileArgs),
    /// Print an intermediate compilation artifact.
    Explain {
        #[command(flatten)]
        args: CompileArgs,
        /// Which artifact to print.
        #[arg(long, value_enum)]
        stage: Stage,
    },
    /// Compile and execute against a SPARQL endpoint.
    Run {
        #[command(flatten)]
        args: CompileArgs,
        /// Endpoint URL.
        #[arg(long, env = "VQC_ENDPOINT")]
        endpoint: String,
        /// Result rendering.
        #[arg(long, value_enum, default_value = "table")]
        format: OutputFormat,
        /// Request timeout in seconds.
        #[arg(long, default_value = "60")]
        timeout: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

/// `Err` is a usage/environment failure (exit 2); `Ok` carries the exit code
/// of the compilation itself.
fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Compile(args) => {
            let (schema, params, document) = load_inputs(&args)?;
            match vqc::compile(&document, &schema, &params) {
                Ok(output) => {
                    report(&output.diagnostics);
                    emit(&args.output, &output.sparql)?;
                    Ok(ExitCode::SUCCESS)
                }
                Err(e) => {
                    report(&e.diagnostics);
                    eprintln!("error: {e}");
                    Ok(ExitCode::from(1))
                }
            }
        }
        Command::Validate(args) => {
            let (schema, params, document) = load_inputs(&args)?;
            match vqc::compile(&document, &schema, &params) {
                Ok(output) => {
                    report(&output.diagnostics);
                    emit(&args.output, "query document is valid")?;
                    Ok(ExitCode::SUCCESS)
                }
                Err(e) => {
                    report(&e.diagnostics);
                    eprintln!("error: {e}");
                    Ok(ExitCode::from(1))
                }
            }
        }
        Command::Explain { args, stage } => {
            let (schema, params, document) = load_inputs(&args)?;
            match explain(&document, &schema, &params, stage) {
                Ok((text, diagnostics)) => {
                    report(&diagnostics);
                    emit(&args.output, &text)?;
                    Ok(ExitCode::SUCCESS)
                }
                Err((message, diagnostics)) => {
                    report(&diagnostics);
                    eprintln!("error: {message}");
                    Ok(ExitCode::from(1))
                }
            }
        }
        Command::Run {
            args,
            endpoint,
            format,
            timeout,
        } => {
            let (schema, params, document) = load_inputs(&args)?;
            let output = match vqc::compile(&document, &schema, &params) {
                Ok(output) => output,
                Err(e) => {
                    report(&e.diagnostics);
                    eprintln!("error: {e}");
                    return Ok(ExitCode::from(1));
                }
            };
            report(&output.diagnostics);
            let mut config = EndpointConfig::new(endpoint);
            config.timeout = Duration::from_secs(timeout);
            let table =
                client::execute_query(&config, &output.sparql).map_err(|e| e.to_string())?;
            let format = match format {
                OutputFormat::Table => ResultFormat::Table,
                OutputFormat::Csv => ResultFormat::Csv,
                OutputFormat::Json => ResultFormat::Json,
            };
            emit(&args.output, &client::format_results(&table, format))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn load_inputs(args: &CompileArgs) -> Result<(Schema, Params, Vec<u8>), String> {
    let schema_bytes = fs::read(&args.schema)
        .map_err(|e| format!("cannot read schema {}: {e}", args.schema.display()))?;
    let (schema, schema_diags) =
        load_schema(&schema_bytes).map_err(|e| format!("schema: {e}"))?;
    report(&schema_diags);
    let params = match &args.params {
        Some(path) => {
            let bytes = fs::read(path)
                .map_err(|e| format!("cannot read params {}: {e}", path.display()))?;
            Params::from_json(&bytes).map_err(|e| format!("params: {e}"))?
        }
        None => Params::default(),
    };
    let document = fs::read(&args.query)
        .map_err(|e| format!("cannot read query {}: {e}", args.query.display()))?;
    Ok((schema, params, document))
}

fn explain(
    document: &[u8],
    schema: &Schema,
    params: &Params,
    stage: Stage,
) -> Result<(String, Diagnostics), (String, Diagnostics)> {
    let doc = vqc::document::parse_query_document(document)
        .map_err(|e| (e.to_string(), Diagnostics::new()))?;
    if stage == Stage::Parse {
        let text = serde_json::to_string_pretty(&doc).expect("document serializes");
        return Ok((text, Diagnostics::new()));
    }
    let mut diagnostics = vqc::document::validate_document(&doc, schema);
    if diagnostics.has_errors() {
        return Err(("query document validation failed".into(), diagnostics));
    }
    let ast = vqc::ast::build_initial_ast(&doc, schema)
        .map_err(|e| (e.to_string(), diagnostics.clone()))?;
    let (ast, table) = vqc::ast::complete_ast(ast, schema, &mut diagnostics)
        .map_err(|e| (e.to_string(), diagnostics.clone()))?;
    if diagnostics.has_errors() {
        return Err(("name resolution failed".into(), diagnostics));
    }
    match stage {
        Stage::Parse => unreachable!(),
        Stage::Ast => Ok((format!("{ast:#?}"), diagnostics)),
        Stage::Symbols => {
            let text =
                serde_json::to_string_pretty(&table.dump_json()).expect("dump serializes");
            Ok((text, diagnostics))
        }
        Stage::Model => {
            let vars = vqc::generate::assign_variables(&ast, &table, &mut diagnostics)
                .map_err(|e| (e.to_string(), diagnostics.clone()))?;
            let model = vqc::generate::build_generation_model(
                &ast,
                &table,
                &vars,
                params,
                schema,
                &mut diagnostics,
            )
            .map_err(|e| (e.to_string(), diagnostics.clone()))?;
            if diagnostics.has_errors() {
                return Err(("query generation failed".into(), diagnostics));
            }
            Ok((format!("{model:#?}"), diagnostics))
        }
    }
}

fn report(diagnostics: &Diagnostics) {
    for d in diagnostics.iter() {
        eprintln!("{d}");
    }
}

fn emit(output: &Option<PathBuf>, text: &str) -> Result<(), String> {
    match output {
        Some(path) => fs::write(path, text.as_bytes())
            .map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => {
            // A closed pipe (e.g. `vqc ... | head`) is not an error.
            use std::io::Write;
            let _ = writeln!(std::io::stdout(), "{text}");
            Ok(())
        }
    }
}

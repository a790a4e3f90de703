//! `rue simulate`: emit the 1-D synthetic regression task, optionally with
//! the illustration CSVs behind the similarity-analysis plots: per-sample
//! gradient projections onto the leading Hessian eigenvectors, kernel basis
//! curves for selected samples, and the closed-form uncertainty curve.

use std::path::PathBuf;

use clap::Args;
use rue_core::audit::{build_audit_context, rue_kernel, rue_score_approx, LambdaPolicy};
use rue_core::data::{simulate_saturating_exp, standardize};
use rue_core::linalg::sym_eigendecomp;
use rue_core::model::{objective_hessian, Architecture};
use rue_core::train::{train, TrainConfig};

use crate::commands::train::write_dataset_csv;
use crate::commands::SimulateParams;
use crate::error::CliError;
use crate::manifest::RunManifest;

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub sim: SimulateParams,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output dataset CSV (x,y rows).
    #[arg(long)]
    pub out: PathBuf,

    /// Also train a model and emit the illustration CSVs.
    #[arg(long)]
    pub illustrate: bool,
    /// Directory for the illustration CSVs.
    #[arg(long, required_if_eq("illustrate", "true"))]
    pub out_dir: Option<PathBuf>,
    /// Grid resolution of the curve CSVs.
    #[arg(long, default_value_t = 200)]
    pub grid_points: usize,
    /// Hidden width of the illustration model.
    #[arg(long, default_value_t = 50)]
    pub hidden: usize,
    /// Training epochs of the illustration model.
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,
    /// How many training samples get a kernel basis curve.
    #[arg(long, default_value_t = 3)]
    pub basis_samples: usize,
}

pub fn run(args: &SimulateArgs) -> Result<(), CliError> {
    let params = args.sim.to_params();
    let data = simulate_saturating_exp(&params, args.n, args.seed);
    write_dataset_csv(&args.out, &data)?;

    let mut manifest = RunManifest::new("simulate", args.seed, &args.sim)?;
    manifest.add_output(&args.out);

    if args.illustrate {
        let out_dir = args.out_dir.as_ref().expect("clap required_if_eq");
        std::fs::create_dir_all(out_dir)
            .map_err(|e| CliError::input(format!("cannot create {}: {e}", out_dir.display())))?;

        // Train on the standardized task and freeze the audit context.
        let placeholder = data.clone();
        let (train_std, _, stats) = standardize(&data, &placeholder)?;
        let arch = Architecture::mlp(1, args.hidden)?;
        let config = TrainConfig {
            epochs: args.epochs,
            seed: args.seed,
            ..TrainConfig::default()
        };
        let model = train(&arch, &train_std, &config)?;
        let ctx = build_audit_context(&model, &train_std, LambdaPolicy::MinEigenvalueAtLeast(1.0))?;

        // Leading directions of the damped Hessian.
        let penalty = model.config.penalty();
        let h = objective_hessian(&model.arch, &model.theta_hat, &train_std, penalty, 4000)?;
        let eig = sym_eigendecomp(&h.shifted(ctx.lambda()))?;
        let d = model.theta_hat.len();
        let top1: Vec<f64> = eig.eigenvectors().col(d - 1);
        let top2: Vec<f64> = eig.eigenvectors().col(d - 2);

        // Per-sample loss gradient projections onto the top-2 eigenvectors.
        let grad_path = out_dir.join("gradient_projections.csv");
        let mut out = String::from("sample_index,x,residual,proj_top1,proj_top2\n");
        let l = ctx.loss_gradients();
        for i in 0..train_std.n() {
            let col = l.column(i);
            let p1: f64 = col.iter().zip(&top1).map(|(a, b)| a * b).sum();
            let p2: f64 = col.iter().zip(&top2).map(|(a, b)| a * b).sum();
            let f = rue_core::model::forward(&model.arch, &model.theta_hat, train_std.input_row(i))
                .map_err(CliError::from)?;
            let r = f - train_std.target(i);
            out.push_str(&format!("{i},{},{r},{p1},{p2}\n", data.input_row(i)[0]));
        }
        std::fs::write(&grad_path, out)
            .map_err(|e| CliError::input(format!("cannot write {}: {e}", grad_path.display())))?;
        manifest.add_output(&grad_path);

        // Grid in original units, standardized for the model.
        let (x_min, x_max) = (params.x_min, params.x_max);
        let grid: Vec<f64> = (0..args.grid_points)
            .map(|k| x_min + (x_max - x_min) * k as f64 / (args.grid_points - 1).max(1) as f64)
            .collect();
        let to_std = |x: f64| (x - stats.input_mean[0]) / stats.input_std[0];

        // Kernel basis curves for samples spread across the input range.
        let basis_path = out_dir.join("kernel_basis.csv");
        let mut order: Vec<usize> = (0..data.n()).collect();
        order.sort_by(|&a, &b| data.input_row(a)[0].total_cmp(&data.input_row(b)[0]));
        let picks: Vec<usize> = (0..args.basis_samples.max(1).min(data.n()))
            .map(|k| order[(k * (data.n() - 1)) / args.basis_samples.max(1).min(data.n()).max(1)])
            .collect();
        let mut out = String::from("sample_index,sample_x,x,k\n");
        for &i in &picks {
            let xi = [to_std(data.input_row(i)[0])];
            for &x in &grid {
                let k = rue_kernel(&ctx, &[to_std(x)], &xi)?;
                out.push_str(&format!("{i},{},{x},{k}\n", data.input_row(i)[0]));
            }
        }
        std::fs::write(&basis_path, out)
            .map_err(|e| CliError::input(format!("cannot write {}: {e}", basis_path.display())))?;
        manifest.add_output(&basis_path);

        // Closed-form uncertainty curve over the same grid.
        let curve_path = out_dir.join("rue_curve.csv");
        let mut out = String::from("x,sigma2\n");
        for &x in &grid {
            let s = rue_score_approx(&ctx, &train_std, &[to_std(x)])?;
            out.push_str(&format!("{x},{s}\n"));
        }
        std::fs::write(&curve_path, out)
            .map_err(|e| CliError::input(format!("cannot write {}: {e}", curve_path.display())))?;
        manifest.add_output(&curve_path);

        eprintln!("wrote illustration CSVs to {}", out_dir.display());
    }

    manifest.write_beside(&args.out)?;
    eprintln!("wrote {} samples to {}", data.n(), args.out.display());
    Ok(())
}

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "advaudit/config.hpp"
#include "advaudit/io.hpp"
#include "advaudit/metrics.hpp"
#include "advaudit/pipeline.hpp"
#include "advaudit/report.hpp"

namespace {

using namespace advaudit;

struct CommonOpts {
  std::string config_path;
  std::vector<std::uint64_t> seed_override;
  std::string out_override;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("-c,--config", opts.config_path, "run configuration file")->required();
  cmd->add_option("--seed", opts.seed_override, "override the configured seed list");
  cmd->add_option("--out", opts.out_override, "artifact directory (default $ADVAUDIT_OUT or ./runs)");
}

RunConfig load_config(const CommonOpts& opts) {
  RunConfig cfg = load_run_config(opts.config_path);
  if (!opts.seed_override.empty()) cfg.seeds = opts.seed_override;
  if (!opts.out_override.empty()) cfg.output_dir = opts.out_override;
  cfg.validate();
  return cfg;
}

int cmd_generate(const CommonOpts& opts) {
  const RunConfig cfg = load_config(opts);
  for (const auto seed : cfg.seeds) {
    SeedContext ctx(cfg, seed);
    const Dataset& ds = ctx.nominal();
    std::cout << "seed " << seed << ": " << ds.examples() << " examples -> " << ctx.dir()
              << "\n";
  }
  return 0;
}

int cmd_train(const CommonOpts& opts) {
  const RunConfig cfg = load_config(opts);
  for (const auto seed : cfg.seeds) {
    SeedContext ctx(cfg, seed);
    const nn::Checkpoint& ckpt = ctx.nominal_model();
    std::cout << "seed " << seed << ": trained " << nn::family_name(ckpt.spec.family)
              << " model (" << ckpt.params.size() << " parameters) -> " << ctx.dir() << "\n";
  }
  return 0;
}

int cmd_attack(const CommonOpts& opts) {
  const RunConfig cfg = load_config(opts);
  for (const auto seed : cfg.seeds) {
    SeedContext ctx(cfg, seed);
    const Dataset& nominal = ctx.nominal();
    const Dataset& adversarial = ctx.adversarial();
    const nn::Checkpoint& model = ctx.nominal_model();
    const std::vector<double> s_nom = nn::predict(model, nominal);
    const std::vector<double> s_adv = nn::predict(model, adversarial);
    std::cout << "seed " << seed << ": fooling ratio "
              << fooling_ratio(s_nom, s_adv) << " -> " << ctx.dir() << "\n";
  }
  return 0;
}

int cmd_validate(const CommonOpts& opts) {
  const RunConfig cfg = load_config(opts);
  bool all_ok = true;
  for (const auto seed : cfg.seeds) {
    SeedContext ctx(cfg, seed);
    const ValidationSummary v = validate_seed(cfg, ctx.nominal(), ctx.adversarial(), seed);
    const double aux_mid = 0.5 * (cfg.validation.aux_auc_lo + cfg.validation.aux_auc_hi);
    (void)aux_mid;
    const bool aux_ok =
        v.aux_auc >= cfg.validation.aux_auc_lo && v.aux_auc <= cfg.validation.aux_auc_hi;
    const bool ok = v.chi2_ok && v.pearson_ok && v.z_mean_ok && v.z_skew_ok && aux_ok;
    all_ok = all_ok && ok;
    std::cout << "seed " << seed << ": aux_auc " << v.aux_auc << " chi2/ndf ["
              << v.chi2_min << ", " << v.chi2_max << "] max|dPearson| " << v.pearson_delta_max
              << " z mean " << v.z_mean << " skew " << v.z_skewness << " -> "
              << (ok ? "PASS" : "FAIL") << "\n";
  }
  return all_ok ? 0 : 1;
}

int cmd_evaluate(const CommonOpts& opts) {
  const RunConfig cfg = load_config(opts);
  for (const auto seed : cfg.seeds) {
    const auto j = run_seed_audit(cfg, seed);
    std::cout << "seed " << seed << ": model auc nominal "
              << j["models"]["nominal"]["nominal"]["auc"].get<double>() << " adversarial "
              << j["models"]["nominal"]["adversarial"]["auc"].get<double>() << " fooling "
              << j["fooling_ratio"].get<double>() << "\n";
  }
  return 0;
}

int cmd_audit(const CommonOpts& opts, int jobs) {
  const RunConfig cfg = load_config(opts);
  const AuditOutcome outcome = run_audit(cfg, jobs);
  std::cout << render_report_text(outcome.report);
  std::cout << "report: " << outcome.report_path << "\n";
  return outcome.gates_passed && outcome.all_complete ? 0 : 1;
}

int cmd_report(const std::string& path) {
  std::cout << render_report_text(load_report(path));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"uncertainty-constrained adversarial robustness audits"};
  app.require_subcommand(1);

  CommonOpts generate_opts, train_opts, attack_opts, validate_opts, evaluate_opts, audit_opts;
  int jobs = 1;
  std::string report_path;

  add_common(app.add_subcommand("generate", "generate nominal datasets"), generate_opts);
  add_common(app.add_subcommand("train", "train the nominal classifier"), train_opts);
  add_common(app.add_subcommand("attack", "generate adversarial datasets"), attack_opts);
  add_common(app.add_subcommand("validate", "run the indistinguishability gates"), validate_opts);
  add_common(app.add_subcommand("evaluate", "evaluate models on nominal and adversarial data"),
             evaluate_opts);
  auto* audit = app.add_subcommand("audit", "full workflow across all seeds");
  add_common(audit, audit_opts);
  audit->add_option("--jobs", jobs, "parallel seed jobs")->check(CLI::PositiveNumber);
  app.add_subcommand("report", "pretty-print a report file")
      ->add_option("path", report_path, "report.json path")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("generate")) return cmd_generate(generate_opts);
    if (app.got_subcommand("train")) return cmd_train(train_opts);
    if (app.got_subcommand("attack")) return cmd_attack(attack_opts);
    if (app.got_subcommand("validate")) return cmd_validate(validate_opts);
    if (app.got_subcommand("evaluate")) return cmd_evaluate(evaluate_opts);
    if (app.got_subcommand("audit")) return cmd_audit(audit_opts, jobs);
    if (app.got_subcommand("report")) return cmd_report(report_path);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  }
  return 0;
}

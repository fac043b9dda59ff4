// editcast: generate synthetic edit logs, fit and evaluate forecasting
// models, and build leaderboards.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "editcast.hpp"

namespace fs = std::filesystem;
using namespace editcast;

namespace {

struct Globals {
  std::uint64_t seed = 42;
  bool seed_given = false;
  Timestamp cutoff = 1283299200;
  int month_days = 30;
  unsigned workers = 1;

  CutoffConfig cutoff_config() const {
    CutoffConfig c;
    c.cutoff_ts = cutoff;
    c.month_len = static_cast<Timestamp>(month_days) * kSecondsPerDay;
    c.validate();
    return c;
  }
};

struct LogPaths {
  std::string edits;
  std::string registrations;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--edits", edits, "Edit log TSV (.gz allowed)")->required();
    cmd->add_option("--registrations", registrations, "Registration TSV (.gz allowed)")->required();
  }
  std::vector<EditorHistory> load() const { return parse_log(io::read_file(edits), io::read_file(registrations), true); }
};

struct ModelChoice {
  std::string form = "linear";
  std::string scheme;   // empty = oldnew2 for forests, join3 otherwise
  std::string catalog;  // empty = default for the form
  int trees = 0;        // forests only; 0 = default
  int bag = 0;          // >0 wraps parametric fits in a bootstrap bag
  std::string rule = "geometric";

  void add_to(CLI::App* cmd) {
    cmd->add_option("--form", form, "persistence|downscaled|linear|loglog|interaction|forest")->capture_default_str();
    cmd->add_option("--scheme", scheme, "whole|join3|oldnew2|activity|nested7 (default: oldnew2 for forests, else join3)");
    cmd->add_option("--catalog", catalog, "Feature catalog name (default depends on --form)");
    cmd->add_option("--trees", trees, "Trees per forest cell (forest form)");
    cmd->add_option("--bag", bag, "Bootstrap replicates (parametric forms)");
    cmd->add_option("--rule", rule, "Bag aggregation rule: median|geometric")->capture_default_str();
  }

  bool is_forest() const { return form == "forest"; }

  std::string resolved_scheme() const { return !scheme.empty() ? scheme : is_forest() ? "oldnew2" : "join3"; }

  std::string catalog_name() const {
    if (!catalog.empty()) return catalog;
    if (form == "persistence" || form == "downscaled") return "persistence";
    if (form == "loglog") return "loglog80";
    if (form == "interaction") return "interaction_A";
    if (form == "forest") return "model8";
    return "baseline";
  }

  std::string default_name() const {
    std::string n = form + "_" + resolved_scheme() + "_" + catalog_name();
    if (bag > 0) n += "_bag" + std::to_string(bag) + "_" + rule;
    return n;
  }

  /// Catalog the dataset must provide.
  FeatureCatalog needed_catalog() const {
    if (catalog_name() == "model8") {
      const std::vector<FeatureCatalog> cs{standard_catalog("rf_old19"), standard_catalog("rf_new14")};
      return catalog_union(cs);
    }
    return standard_catalog(catalog_name());
  }

  ModelForm parametric_form() const {
    const auto kind = parse_form(form);
    ModelForm f{kind, standard_catalog(catalog_name()), {}};
    if (parse_scheme(resolved_scheme()) == SegmentScheme::nested7) {
      if (catalog_name() == "nested_per_segment") f.cell_features = nested_cell_features('a');
      if (catalog_name() == "nested_per_segment_b") f.cell_features = nested_cell_features('b');
    }
    return f;
  }

  Model train(const Dataset& data, const Globals& g) const {
    const auto sch = parse_scheme(resolved_scheme());
    if (is_forest()) {
      if (bag > 0) throw ArgumentError("--bag applies to parametric forms only");
      std::vector<ForestCellSpec> specs;
      if (catalog_name() == "model8") {
        if (sch != SegmentScheme::old_new2) throw ArgumentError("catalog model8 requires --scheme oldnew2");
        specs = model8_specs(g.seed);
        if (trees > 0)
          for (auto& s : specs) s.config.n_trees = trees;
      } else {
        for (int c = 0; c < cell_count(sch); ++c) {
          ForestConfig fc;
          fc.n_trees = trees > 0 ? trees : 150;
          fc.seed = derive_seed(g.seed, "forest.cell", static_cast<std::uint64_t>(c));
          specs.push_back({standard_catalog(catalog_name()), fc});
        }
      }
      return train_forest_model(data, sch, specs, g.workers);
    }
    const auto f = parametric_form();
    OptimizerConfig oc;
    oc.seed = derive_seed(g.seed, "cli.fit");
    if (bag > 0) {
      const auto kind = parse_aggregation(rule);
      if (kind == AggregationKind::arithmetic) throw ArgumentError("--rule must be median or geometric for bags");
      return bootstrap_bag(
          data, bag,
          [&](const Dataset& d, std::size_t r) {
            auto c = oc;
            c.seed = derive_seed(oc.seed, "replicate", r);
            return fit(d, f, sch, c);
          },
          AggregationRule{kind, {}}, derive_seed(g.seed, "cli.bag"), g.workers);
    }
    return fit(data, f, sch, oc);
  }
};

Dataset dataset_for(const std::vector<EditorHistory>& hs, const Globals& g, const FeatureCatalog& catalog) {
  return build_dataset(hs, g.cutoff_config(), catalog, g.workers);
}

void write_out(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    io::write_file_atomic(path, text);
  }
}

int run(int argc, char** argv) {
  CLI::App app{"Editor activity forecasting toolkit"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Root random seed")->capture_default_str();
  app.add_option("--cutoff", g.cutoff, "Cutoff timestamp (epoch seconds)")->capture_default_str();
  app.add_option("--month-days", g.month_days, "Days per month")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--workers", g.workers, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a synthetic population");
  std::string gen_config, gen_out;
  std::optional<std::int64_t> gen_n;
  bool gen_surv = false, gen_gzip = false;
  gen->add_option("--config", gen_config, "key=value population config");
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--n", gen_n, "Number of editors (overrides config)");
  gen->add_flag("--survivorship", gen_surv, "Keep only editors active in the year before the cutoff");
  gen->add_flag("--gzip", gen_gzip, "Write .tsv.gz files");

  // featurize
  auto* feat = app.add_subcommand("featurize", "Extract a feature table");
  LogPaths feat_logs;
  feat_logs.add_to(feat);
  std::string feat_catalog = "baseline", feat_out;
  feat->add_option("--catalog", feat_catalog, "Catalog name, or 'all'")->capture_default_str();
  feat->add_option("--out", feat_out, "Output TSV (default stdout)");

  // fit
  auto* fitc = app.add_subcommand("fit", "Fit a model on every editor of a log");
  LogPaths fit_logs;
  fit_logs.add_to(fitc);
  ModelChoice fit_choice;
  fit_choice.add_to(fitc);
  std::string fit_out;
  fitc->add_option("--out", fit_out, "Model file")->required();

  // bag
  auto* bagc = app.add_subcommand("bag", "Fit a bootstrap bag of parametric models");
  LogPaths bag_logs;
  bag_logs.add_to(bagc);
  ModelChoice bag_choice;
  bag_choice.bag = 25;
  bag_choice.add_to(bagc);
  std::string bag_out;
  bagc->add_option("--out", bag_out, "Model file")->required();

  // predict
  auto* pred = app.add_subcommand("predict", "Predict next-period edits");
  LogPaths pred_logs;
  pred_logs.add_to(pred);
  std::string pred_model, pred_out;
  pred->add_option("--model", pred_model, "Model file")->required();
  pred->add_option("--out", pred_out, "Predictions TSV (default stdout)");

  // eval
  auto* evalc = app.add_subcommand("eval", "Score a predictions file");
  LogPaths eval_logs;
  eval_logs.add_to(evalc);
  std::string eval_pred, eval_name = "model", eval_out;
  evalc->add_option("--predictions", eval_pred, "Predictions TSV")->required();
  evalc->add_option("--name", eval_name, "Model name for the output row")->capture_default_str();
  evalc->add_option("--out", eval_out, "Append the row to this TSV instead of printing");

  // ensemble
  auto* ens = app.add_subcommand("ensemble", "Aggregate member model predictions");
  LogPaths ens_logs;
  ens_logs.add_to(ens);
  std::string ens_spec, ens_out;
  ens->add_option("--spec", ens_spec, "Ensemble spec file")->required();
  ens->add_option("--out", ens_out, "Predictions TSV (default stdout)");

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "Split, fit, score on the holdout, append to a leaderboard");
  LogPaths pipe_logs;
  pipe_logs.add_to(pipe);
  ModelChoice pipe_choice;
  pipe_choice.add_to(pipe);
  double pipe_split = 0.8;
  bool pipe_ladder = false;
  std::string pipe_board, pipe_manifest, pipe_name, pipe_pred_dir;
  int pipe_bag_k = 25;
  pipe->add_option("--split", pipe_split, "Training fraction of editors")->capture_default_str();
  pipe->add_flag("--ladder", pipe_ladder, "Fit the full model ladder instead of one model");
  pipe->add_option("--ladder-bag", pipe_bag_k, "Replicates for the ladder's bagged models")->capture_default_str();
  pipe->add_option("--leaderboard", pipe_board, "Leaderboard TSV to append to")->required();
  pipe->add_option("--manifest", pipe_manifest, "Run manifest JSON (default: leaderboard path + .manifest.json)");
  pipe->add_option("--name", pipe_name, "Leaderboard model name");
  pipe->add_option("--predictions-dir", pipe_pred_dir, "Write holdout predictions here, one TSV per row");

  // report
  auto* rep = app.add_subcommand("report", "Render a leaderboard table and diagnostic plots");
  std::string rep_board, rep_out, rep_edits, rep_regs;
  double rep_xmin = 0.0;
  rep->add_option("--leaderboard", rep_board, "Leaderboard TSV")->required();
  rep->add_option("--out-dir", rep_out, "Directory for table.txt and SVG plots")->required();
  rep->add_option("--edits", rep_edits, "Edit log for the CCDF and monthly plots");
  rep->add_option("--registrations", rep_regs, "Registration TSV for the plots");
  rep->add_option("--xmin", rep_xmin, "Tail threshold for the CCDF fit (0 = automatic)")->capture_default_str();

  // pareto
  auto* par = app.add_subcommand("pareto", "Fit a power-law tail to per-editor edit counts");
  LogPaths par_logs;
  par_logs.add_to(par);
  int par_months = 12;
  double par_xmin = 0.0;
  par->add_option("--months", par_months, "Months before the cutoff to count")->capture_default_str();
  par->add_option("--xmin", par_xmin, "Tail threshold (0 = automatic)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::argument);
  }
  g.seed_given = app.count("--seed") > 0;

  if (*gen) {
    PopulationConfig pc;
    if (!gen_config.empty()) pc = parse_population_config(io::read_file(gen_config));
    if (gen_n) pc.n_editors = *gen_n;
    if (g.seed_given) pc.seed = g.seed;
    if (app.count("--cutoff")) pc.cutoff_ts = g.cutoff;
    if (app.count("--month-days")) pc.month_days = g.month_days;
    pc.validate();
    RunManifest manifest("gen");
    if (!gen_config.empty()) manifest.add_input(gen_config);
    manifest.set("n_editors", pc.n_editors);
    manifest.set("seed", pc.seed);
    manifest.set("cutoff", pc.cutoff_ts);
    manifest.set("survivorship", gen_surv);
    auto hs = generate(pc, g.workers);
    if (gen_surv) {
      CutoffConfig cc;
      cc.cutoff_ts = pc.cutoff_ts;
      cc.month_len = pc.month_len();
      hs = survivorship_filter(std::move(hs), cc);
    }
    fs::create_directories(gen_out);
    const std::string ext = gen_gzip ? ".tsv.gz" : ".tsv";
    const auto edits = fs::path(gen_out) / ("edits" + ext);
    const auto regs = fs::path(gen_out) / ("registrations" + ext);
    io::write_file_atomic(edits, serialize_edits(hs, true));
    io::write_file_atomic(regs, serialize_registrations(hs, true));
    manifest.add_output(edits);
    manifest.add_output(regs);
    manifest.write(fs::path(gen_out) / "manifest.json");
    std::cout << "editors\t" << hs.size() << "\n";
    return 0;
  }

  if (*feat) {
    const auto hs = feat_logs.load();
    const auto catalog = feat_catalog == "all" ? ladder_catalog() : standard_catalog(feat_catalog);
    write_out(feat_out, serialize_dataset(dataset_for(hs, g, catalog)));
    return 0;
  }

  if (*fitc || *bagc) {
    const auto& logs = *fitc ? fit_logs : bag_logs;
    const auto& choice = *fitc ? fit_choice : bag_choice;
    const auto& out = *fitc ? fit_out : bag_out;
    const auto data = dataset_for(logs.load(), g, choice.needed_catalog());
    const auto m = choice.train(data, g);
    save_model(out, m);
    std::cout << "params\t" << parameter_count(m) << "\n";
    return 0;
  }

  if (*pred) {
    const auto m = load_model(pred_model);
    const auto data = dataset_for(pred_logs.load(), g, model_catalog(m));
    const auto p = predict_dataset(m, data);
    write_out(pred_out, serialize_predictions(data, p));
    return 0;
  }

  if (*evalc) {
    const auto data = dataset_for(eval_logs.load(), g, FeatureCatalog({"e_p"}));
    const auto r = score_predictions(parse_predictions(io::read_file(eval_pred)), data);
    const auto row = format_eval_row(eval_name, r);
    if (eval_out.empty()) {
      std::cout << row;
    } else {
      std::string text = fs::exists(eval_out) ? io::read_file(eval_out) : "";
      if (text.empty()) text = "model_name\tn\tepsilon\n";
      io::write_file_atomic(eval_out, text + row);
    }
    return 0;
  }

  if (*ens) {
    const auto spec = parse_ensemble_spec(io::read_file(ens_spec));
    const auto base = fs::path(ens_spec).parent_path();
    std::vector<Model> members;
    for (const auto& p : spec.members) {
      const fs::path mp = fs::path(p).is_absolute() ? fs::path(p) : base / p;
      members.push_back(load_model(mp));
    }
    std::vector<FeatureCatalog> cats;
    for (const auto& m : members) cats.push_back(model_catalog(m));
    const auto data = dataset_for(ens_logs.load(), g, catalog_union(cats));
    std::vector<std::vector<double>> cols;
    for (const auto& m : members) cols.push_back(predict_dataset(m, data));
    write_out(ens_out, serialize_predictions(data, aggregate_columns(cols, spec.rule)));
    return 0;
  }

  if (*pipe) {
    RunManifest manifest(pipe_ladder ? "pipeline --ladder" : "pipeline");
    manifest.add_input(pipe_logs.edits);
    manifest.add_input(pipe_logs.registrations);
    manifest.set("seed", g.seed);
    manifest.set("cutoff", g.cutoff);
    manifest.set("month_days", g.month_days);
    manifest.set("split", pipe_split);
    manifest.set("workers", g.workers);
    const auto hs = pipe_logs.load();
    std::vector<LeaderboardRow> rows;
    std::vector<std::pair<std::string, std::vector<double>>> preds;
    Split split;
    if (pipe_ladder) {
      manifest.set("ladder_bag", pipe_bag_k);
      split = split_by_editor(dataset_for(hs, g, ladder_catalog()), pipe_split, derive_seed(g.seed, "pipeline.split"));
      manifest.mark("featurize");
      LadderOptions lo;
      lo.seed = g.seed;
      lo.workers = g.workers;
      lo.bag_k = pipe_bag_k;
      const auto result = run_ladder(split.train, split.holdout, lo);
      rows = result.leaderboard();
      preds.emplace_back("optimal_constant", std::vector<double>(split.holdout.size(), result.constant));
      for (const auto& e : result.entries) preds.emplace_back(e.name, e.holdout_predictions);
    } else {
      manifest.set("form", pipe_choice.form);
      manifest.set("scheme", pipe_choice.resolved_scheme());
      manifest.set("catalog", pipe_choice.catalog_name());
      manifest.set("bag", pipe_choice.bag);
      split = split_by_editor(dataset_for(hs, g, pipe_choice.needed_catalog()), pipe_split,
                              derive_seed(g.seed, "pipeline.split"));
      manifest.mark("featurize");
      const auto m = pipe_choice.train(split.train, g);
      auto p = predict_dataset(m, split.holdout);
      const auto name = pipe_name.empty() ? pipe_choice.default_name() : pipe_name;
      rows.push_back({name, parameter_count(m), rmsle(p, targets(split.holdout)).epsilon});
      preds.emplace_back(name, std::move(p));
    }
    manifest.mark("fit");
    for (const auto& r : rows) append_leaderboard_row(pipe_board, r);
    manifest.add_output(pipe_board);
    if (!pipe_pred_dir.empty()) {
      fs::create_directories(pipe_pred_dir);
      for (const auto& [name, p] : preds) {
        const auto path = fs::path(pipe_pred_dir) / (name + ".tsv");
        io::write_file_atomic(path, serialize_predictions(split.holdout, p));
        manifest.add_output(path);
      }
    }
    for (const auto& r : rows) std::cout << format_leaderboard_row(r);
    manifest.write(pipe_manifest.empty() ? pipe_board + ".manifest.json" : pipe_manifest);
    return 0;
  }

  if (*rep) {
    const auto rows = parse_leaderboard(io::read_file(rep_board));
    const auto table = render_table(rows);
    fs::create_directories(rep_out);
    io::write_file_atomic(fs::path(rep_out) / "table.txt", table);
    std::cout << table;
    if (!rep_edits.empty() || !rep_regs.empty()) {
      if (rep_edits.empty() || rep_regs.empty()) throw ArgumentError("report: --edits and --registrations go together");
      const auto hs = parse_log(io::read_file(rep_edits), io::read_file(rep_regs), true);
      const auto cc = g.cutoff_config();
      const auto counts = pre_cutoff_counts(hs, cc);
      const auto ccdf = render_ccdf(counts, rep_xmin);
      io::write_file_atomic(fs::path(rep_out) / "ccdf.svg", ccdf.svg);
      io::write_file_atomic(fs::path(rep_out) / "monthly.svg", render_monthly(cohort_monthly_totals(hs, cc)));
      std::cout << "lambda\t" << io::format_fixed(ccdf.fit.lambda_hat, 6) << "\n";
    }
    return 0;
  }

  if (*par) {
    const auto hs = par_logs.load();
    detail::require(par_months >= 1, "--months must be >= 1");
    const auto counts = pre_cutoff_counts(hs, g.cutoff_config(), par_months);
    const auto fit = par_xmin > 0 ? fit_pareto_tail(counts, par_xmin) : fit_pareto_tail_auto(std::span<const std::int64_t>(counts));
    std::cout << "lambda\t" << io::format_fixed(fit.lambda_hat, 6) << "\nx_min\t" << io::format_fixed(fit.x_min, 3)
              << "\nn_tail\t" << fit.n_tail << "\n";
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::cerr << "editcast: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "editcast: " << e.what() << "\n";
    return static_cast<int>(ExitCode::argument);
  } catch (const std::exception& e) {
    std::cerr << "editcast: " << e.what() << "\n";
    return static_cast<int>(ExitCode::data);
  }
}

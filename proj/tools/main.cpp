#include <CLI11.hpp>

#include "cli.hpp"

int main(int argc, char** argv) {
  using namespace t2t::cli;
  CLI::App app{"Hierarchical table-to-text generator"};
  app.require_subcommand(1);
  RunOptions opts;

  auto data_opts = [&](CLI::App* sub) {
    sub->add_option("--data", opts.data, "Corpus directory with train/dev/test.json");
    sub->add_option("--split", opts.split, "Split to process")
        ->check(CLI::IsMember({"train", "dev", "test"}));
  };
  auto model_opts = [&](CLI::App* sub) {
    sub->add_option("--config", opts.config_path, "JSON config file");
    sub->add_option("--seed", opts.seed, "Run seed");
    sub->add_option("--window", opts.window, "History window");
    sub->add_option("--hidden", opts.hidden, "Hidden size");
  };

  auto* train = app.add_subcommand("train", "Train a model");
  data_opts(train);
  model_opts(train);
  train->add_option("--epochs", opts.epochs, "Maximum epochs");
  train->add_option("--out", opts.out, "Run directory (config, log, checkpoints)");
  train->add_option("--beam", opts.beam, "Beam size for dev decoding");

  auto* gen = app.add_subcommand("generate", "Beam-search summaries for a split");
  data_opts(gen);
  gen->add_option("--checkpoint", opts.checkpoint, "Checkpoint file")->required();
  gen->add_option("--beam", opts.beam, "Beam size");
  gen->add_option("--out", opts.out, "Output JSON (stdout if omitted)");

  auto* eval = app.add_subcommand("evaluate", "Score generated summaries against references");
  data_opts(eval);
  eval->add_option("--generated", opts.generated, "Generated summaries JSON")->required();
  eval->add_option("--out", opts.out, "Report JSON (stdout if omitted)");

  auto* tmpl = app.add_subcommand("template", "Template summaries for a split");
  data_opts(tmpl);
  tmpl->add_option("--out", opts.out, "Output JSON (stdout if omitted)");

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of the full model");
  grad->add_option("--seed", opts.seed, "Fixture seed");
  grad->add_option("--out", opts.out, "Report JSON (stdout if omitted)");

  auto* toy = app.add_subcommand("gen-toy", "Write a synthetic corpus");
  toy->add_option("--seed", opts.seed, "Corpus seed");
  toy->add_option("--games", opts.games, "Number of games");
  toy->add_option("--players", opts.players, "Players per team");
  toy->add_option("--dev", opts.dev_games, "Games held out for dev");
  toy->add_option("--test", opts.test_games, "Games held out for test");
  toy->add_option("--out", opts.out, "Corpus directory")->required();

  CLI11_PARSE(app, argc, argv);

  if (*train) return cmd_train(opts);
  if (*gen) return cmd_generate(opts);
  if (*eval) return cmd_evaluate(opts);
  if (*tmpl) return cmd_template(opts);
  if (*grad) return cmd_gradcheck(opts);
  return cmd_gen_toy(opts);
}

#include "pbt/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "pbt/alloc_tracker.hpp"
#include "pbt/build.hpp"
#include "pbt/fingerprint.hpp"
#include "pbt/parallel.hpp"
#include "pbt/serialize.hpp"
#include "pbt/text.hpp"

namespace pbt::cli {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::uint64_t parse_number(std::string_view s) {
  if (s.empty() || s.size() > 20) throw UsageError("bad number '" + std::string(s) + "'");
  std::uint64_t v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') throw UsageError("bad number '" + std::string(s) + "'");
    const std::uint64_t d = static_cast<std::uint64_t>(c - '0');
    if (v > (~std::uint64_t{0} - d) / 10) throw UsageError("number out of range '" + std::string(s) + "'");
    v = v * 10 + d;
  }
  return v;
}

Byte parse_symbol(std::string_view s) {
  if (s.size() == 1) return static_cast<Byte>(s[0]);
  if (s.size() == 4 && s[0] == '\\' && s[1] == 'x') {
    unsigned v = 0;
    for (char c : s.substr(2)) {
      v <<= 4;
      if (c >= '0' && c <= '9') v |= static_cast<unsigned>(c - '0');
      else if (c >= 'a' && c <= 'f') v |= static_cast<unsigned>(c - 'a' + 10);
      else if (c >= 'A' && c <= 'F') v |= static_cast<unsigned>(c - 'A' + 10);
      else throw UsageError("bad symbol '" + std::string(s) + "'");
    }
    return static_cast<Byte>(v);
  }
  throw UsageError("symbol must be one byte or \\xHH, got '" + std::string(s) + "'");
}

std::string show_byte(Byte b) {
  if (b > 0x20 && b < 0x7f) return std::string(1, static_cast<char>(b));
  char buf[8];
  std::snprintf(buf, sizeof buf, "\\x%02x", b);
  return buf;
}

std::vector<Byte> resolve_track(const std::string& track, const Text& text) {
  if (track == "auto") return TreeParams::default_tracked(text);
  if (track == "all") return text.alphabet();
  if (track == "none") return {};
  return {track.begin(), track.end()};
}

struct ShapeFlags {
  std::optional<std::uint32_t> s, tau, leaf_cutoff;
  std::string track = "auto";
};

void add_shape_flags(CLI::App* cmd, ShapeFlags& f) {
  cmd->add_option("--s", f.s, "top-level arity (default max(8, ceil(n / 2^20)))");
  cmd->add_option("--tau", f.tau, "arity of inner nodes (default 8)");
  cmd->add_option("--leaf-cutoff", f.leaf_cutoff, "maximum explicit block length (default ~log_sigma n)");
  cmd->add_option("--track", f.track, "rank/select symbols: auto, all, none, or the literal symbols");
}

TreeParams make_params(const ShapeFlags& f, const Text& text) {
  TreeParams p = TreeParams::defaults_for(text);
  if (f.s) p.s = *f.s;
  if (f.tau) p.tau = *f.tau;
  if (f.leaf_cutoff) p.leaf_cutoff = *f.leaf_cutoff;
  p.tracked_symbols = resolve_track(f.track, text);
  p.validate();
  return p;
}

struct CorpusFlags {
  std::string input;
  std::size_t synthetic = 0;
  std::size_t seed_len = 16u << 10;
  double mutation_rate = 0.001;
  std::uint64_t rng_seed = 42;
};

void add_corpus_flags(CLI::App* cmd, CorpusFlags& f) {
  cmd->add_option("input", f.input, "input text file");
  cmd->add_option("--synthetic", f.synthetic, "generate a repetitive corpus of this many bytes instead");
  cmd->add_option("--seed-len", f.seed_len, "synthetic seed length");
  cmd->add_option("--mutation-rate", f.mutation_rate, "synthetic per-copy mutation rate");
  cmd->add_option("--rng-seed", f.rng_seed, "synthetic generator seed");
}

Text load_corpus(const CorpusFlags& f) {
  if (f.synthetic > 0) {
    RepetitiveCorpusSpec spec;
    spec.n = f.synthetic;
    spec.seed_len = f.seed_len;
    spec.mutation_rate = f.mutation_rate;
    spec.rng_seed = f.rng_seed;
    return Text(make_repetitive_corpus(spec));
  }
  if (f.input.empty()) throw UsageError("an input file or --synthetic is required");
  return load_text(f.input);
}

int run_queries(const BlockTree& tree, const std::vector<std::string>& specs, std::ostream& out, std::ostream& err,
                std::istream& in) {
  auto one = [&](const std::string& spec) -> int {
    try {
      out << answer_query(tree, spec) << '\n';
      return kOk;
    } catch (const UsageError& e) {
      err << "error: " << e.what() << '\n';
      return kUsage;
    } catch (const UnsupportedSymbolError& e) {
      err << "error: " << e.what() << '\n';
      return kUnsupported;
    } catch (const NotFoundError& e) {
      err << "error: " << e.what() << '\n';
      return kUnsupported;
    } catch (const BoundsError& e) {
      err << "error: " << e.what() << '\n';
      return kUnsupported;
    }
  };
  if (!specs.empty()) {
    for (const auto& s : specs)
      if (int rc = one(s); rc != kOk) return rc;
    return kOk;
  }
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (int rc = one(line); rc != kOk) return rc;
  }
  return kOk;
}

void print_stats(const BlockTree& tree, const Lz77Factorization* lz, std::ostream& out) {
  const TreeStats st = tree.stats(lz);
  out << "n=" << st.n << '\n';
  out << "s=" << tree.params().s << '\n';
  out << "tau=" << tree.params().tau << '\n';
  out << "leaf_cutoff=" << tree.params().leaf_cutoff << '\n';
  out << "levels=" << st.levels.size() << '\n';
  for (std::size_t k = 0; k < st.levels.size(); ++k) {
    const LevelStats& l = st.levels[k];
    out << "level" << k << ".block_len=" << l.block_len << '\n';
    out << "level" << k << ".blocks=" << l.blocks << '\n';
    out << "level" << k << ".marked=" << l.marked << '\n';
    out << "level" << k << ".unmarked=" << l.unmarked << '\n';
  }
  out << "leaf_bytes=" << st.leaf_bytes << '\n';
  out << "tracked_symbols=" << st.tracked_symbols << '\n';
  out << "serialized_size=" << st.serialized_size << '\n';
  out << "ratio=" << st.ratio << '\n';
  if (st.z) {
    out << "z=" << *st.z << '\n';
    out << "z_tau_bound=" << 3 * *st.z * tree.params().tau << '\n';
    out << "z_tau_violations=" << st.levels_over_z_tau_bound.size() << '\n';
  }
}

/// Structural validation, reconstruction and sampled oracle queries.
void verify_tree(const BlockTree& tree, const Text& text) {
  tree.validate_against(text.bytes());
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::uint64_t> pos(1, text.size());
  for (int q = 0; q < 1000; ++q) {
    const auto i = pos(rng);
    if (tree.access(i) != naive_access(text, i)) throw FormatError("access mismatch at " + std::to_string(i));
  }
  for (Byte c : tree.params().tracked_symbols) {
    const std::uint64_t total = naive_rank(text, c, text.size());
    std::uniform_int_distribution<std::uint64_t> ipos(0, text.size());
    for (int q = 0; q < 100; ++q) {
      const auto i = ipos(rng);
      if (tree.rank(c, i) != naive_rank(text, c, i)) throw FormatError("rank mismatch at " + std::to_string(i));
      if (total > 0) {
        const auto j = 1 + rng() % total;
        if (tree.select(c, j) != naive_select(text, c, j)) throw FormatError("select mismatch at " + std::to_string(j));
      }
    }
  }
}

}  // namespace

std::string answer_query(const BlockTree& tree, std::string_view spec) {
  const auto first = spec.find(':');
  if (first == std::string_view::npos) throw UsageError("malformed query '" + std::string(spec) + "'");
  const std::string_view kind = spec.substr(0, first);
  if (kind == "access") return show_byte(tree.access(parse_number(spec.substr(first + 1))));
  if (kind != "rank" && kind != "select") throw UsageError("unknown query kind '" + std::string(kind) + "'");
  const auto last = spec.rfind(':');
  if (last == first) throw UsageError("malformed query '" + std::string(spec) + "'");
  const Byte c = parse_symbol(spec.substr(first + 1, last - first - 1));
  const std::uint64_t v = parse_number(spec.substr(last + 1));
  return std::to_string(kind == "rank" ? tree.rank(c, v) : tree.select(c, v));
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err, std::istream& in) {
  CLI::App app{"Block tree index: build, query and benchmark"};
  app.require_subcommand(1);

  // build
  auto* build = app.add_subcommand("build", "build a tree from a text file");
  std::string build_input, build_output, build_report;
  ShapeFlags build_shape;
  std::uint32_t workers = 1;
  std::size_t queue_capacity = 512;
  bool prune = false;
  build->add_option("input", build_input, "input text file")->required();
  build->add_option("--output", build_output, "tree file to write")->required();
  add_shape_flags(build, build_shape);
  build->add_option("--workers", workers, "worker threads (default 1)");
  build->add_option("--queue-capacity", queue_capacity, "entries per routing queue (default 512)");
  build->add_flag("--prune", prune, "prune untargeted marked blocks");
  build->add_option("--report", build_report, "write a JSON-lines build report");

  // query
  auto* query = app.add_subcommand("query", "answer access:i, rank:c:i, select:c:j (stdin if none given)");
  std::string query_tree;
  std::vector<std::string> query_specs;
  query->add_option("tree", query_tree, "tree file")->required();
  query->add_option("queries", query_specs, "query specs");

  // stats
  auto* stats = app.add_subcommand("stats", "print tree statistics as name=value lines");
  std::string stats_tree, stats_input;
  stats->add_option("tree", stats_tree, "tree file")->required();
  stats->add_option("--input", stats_input, "original text, enables LZ77-based bounds");

  // verify
  auto* verify = app.add_subcommand("verify", "check a tree file against its input");
  std::string verify_tree_path, verify_input;
  verify->add_option("tree", verify_tree_path, "tree file")->required();
  verify->add_option("input", verify_input, "original text file")->required();

  // bench-fp
  auto* bench_fp = app.add_subcommand("bench-fp", "scalar vs blocked fingerprint throughput (CSV)");
  CorpusFlags fp_corpus;
  std::vector<std::size_t> fp_ells{8, 16, 32, 64, 1000};
  int fp_repeat = 3;
  add_corpus_flags(bench_fp, fp_corpus);
  bench_fp->add_option("--ell", fp_ells, "window lengths");
  bench_fp->add_option("--repeat", fp_repeat, "runs per measurement, best is reported");

  // bench-build
  auto* bench_build = app.add_subcommand("bench-build", "construction throughput and heap peak per worker count (CSV)");
  CorpusFlags bb_corpus;
  ShapeFlags bb_shape;
  std::uint32_t max_workers = std::max(4u, std::thread::hardware_concurrency());
  bool bb_prune = false;
  add_corpus_flags(bench_build, bb_corpus);
  add_shape_flags(bench_build, bb_shape);
  bench_build->add_option("--max-workers", max_workers, "largest worker count (powers of two up to it)");
  bench_build->add_option("--queue-capacity", queue_capacity, "entries per routing queue (default 512)");
  bench_build->add_flag("--prune", bb_prune, "prune untargeted marked blocks");

  // gen
  auto* gen = app.add_subcommand("gen", "write a synthetic repetitive corpus");
  RepetitiveCorpusSpec gen_spec;
  std::string gen_output;
  gen->add_option("--n", gen_spec.n, "bytes");
  gen->add_option("--seed-len", gen_spec.seed_len, "seed length");
  gen->add_option("--mutation-rate", gen_spec.mutation_rate, "per-copy mutation rate");
  gen->add_option("--rng-seed", gen_spec.rng_seed, "generator seed");
  gen->add_option("--output", gen_output, "output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*build) {
      const Text text = load_text(build_input);
      const TreeParams params = make_params(build_shape, text);
      BuildConfig config;
      config.workers = workers;
      config.queue_capacity = queue_capacity;
      config.prune = prune;
      config.validate();
      BuildReport report;
      const auto t0 = Clock::now();
      const BlockTree tree = build_parallel(text, params, config, &report);
      const double secs = seconds_since(t0);
      save_tree(tree, build_output);
      if (!build_report.empty()) {
        std::ofstream rep(build_report);
        if (!rep) throw IoError("cannot open " + build_report);
        rep << report.to_json_lines();
      }
      const std::uint64_t size = serialized_size(tree);
      out << "n=" << tree.n() << " levels=" << tree.levels().size() << " size=" << size
          << " ratio=" << static_cast<double>(size) / static_cast<double>(tree.n()) << " seconds=" << secs
          << " workers=" << workers << '\n';
      return kOk;
    }
    if (*query) return run_queries(load_tree(query_tree), query_specs, out, err, in);
    if (*stats) {
      const BlockTree tree = load_tree(stats_tree);
      std::optional<Lz77Factorization> lz;
      if (!stats_input.empty()) lz = lz77_factorize(load_text(stats_input));
      print_stats(tree, lz ? &*lz : nullptr, out);
      return kOk;
    }
    if (*verify) {
      const Text text = load_text(verify_input);
      try {
        verify_tree(load_tree(verify_tree_path), text);
      } catch (const FormatError& e) {
        err << "verify failed: " << e.what() << '\n';
        return kFailure;
      }
      out << "ok\n";
      return kOk;
    }
    if (*bench_fp) {
      const Text text = load_corpus(fp_corpus);
      out << kBenchFpHeader << '\n';
      for (std::size_t ell : fp_ells) {
        if (ell == 0 || ell > text.size()) throw UsageError("window length out of range");
        auto measure = [&](auto make) {
          double best = 1e300;
          std::uint32_t sum = 0;
          std::vector<std::uint32_t> buf(4096);
          for (int r = 0; r < std::max(1, fp_repeat); ++r) {
            auto stream = make();
            sum = 0;
            const auto t0 = Clock::now();
            while (std::size_t got = stream.next(buf))
              for (std::size_t i = 0; i < got; ++i) sum += buf[i];
            best = std::min(best, seconds_since(t0));
          }
          return std::pair{best, sum};
        };
        const auto [ts, cs] = measure([&] { return ScalarWindowStream(text.bytes(), ell); });
        const auto [tb, cb] = measure([&] { return BlockedWindowStream(text.bytes(), ell); });
        const double mib = static_cast<double>(text.size()) / (1 << 20);
        out << "scalar," << ell << ',' << text.size() << ',' << ts << ',' << mib / ts << ',' << cs << '\n';
        out << "blocked," << ell << ',' << text.size() << ',' << tb << ',' << mib / tb << ',' << cb << '\n';
      }
      return kOk;
    }
    if (*bench_build) {
      const Text text = load_corpus(bb_corpus);
      const TreeParams params = make_params(bb_shape, text);
      out << kBenchBuildHeader << '\n';
      for (std::uint32_t w = 1; w <= max_workers; w *= 2) {
        BuildConfig config;
        config.workers = w;
        config.queue_capacity = queue_capacity;
        config.prune = bb_prune;
        const std::size_t base = alloc::current_bytes();
        alloc::reset_peak();
        const auto t0 = Clock::now();
        std::uint64_t size = 0;
        {
          const BlockTree tree = build_parallel(text, params, config);
          size = serialized_size(tree);
        }
        const double secs = seconds_since(t0);
        const std::size_t peak = alloc::peak_bytes() - base;
        const double n = static_cast<double>(text.size());
        out << w << ',' << text.size() << ',' << secs << ',' << n / (1 << 20) / secs << ',' << peak << ','
            << 100.0 * static_cast<double>(peak) / n << ',' << size << ',';
        if (bb_corpus.synthetic > 0) out << bb_corpus.seed_len << ',' << bb_corpus.mutation_rate;
        else out << ',';
        out << '\n';
      }
      return kOk;
    }
    if (*gen) {
      const auto bytes = make_repetitive_corpus(gen_spec);
      std::ofstream f(gen_output, std::ios::binary | std::ios::trunc);
      if (!f) throw IoError("cannot open " + gen_output);
      f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
      if (!f) throw IoError("failed to write " + gen_output);
      return kOk;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return *query ? kUsage : kFailure;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}

}  // namespace pbt::cli

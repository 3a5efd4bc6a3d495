#pragma once

// Plot-ready pivots of cells.csv, one file per figure analogue, plus a
// markdown digest.

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "error.hpp"
#include "experiments.hpp"

namespace evprof {

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error(ErrorKind::io, "cannot write " + p.string());
  return f;
}

inline std::string mean_or_blank(const SummaryRow& r, const MeanStd& m) {
  return r.runs ? fixed6(m.mean) + "," + fixed6(m.std) : ",";
}

}  // namespace detail

// Writes whichever pivots the cells support; returns the file names written.
inline std::vector<std::string> write_pivots(const std::filesystem::path& dir, const std::vector<CellRecord>& cells) {
  if (cells.empty()) throw Error(ErrorKind::aggregation, "cells.csv holds no cells");
  std::filesystem::create_directories(dir);
  const auto rows = summarize(cells);
  std::vector<std::string> written;
  auto rows_of = [&](const std::string& suite) {
    std::vector<const SummaryRow*> out;
    for (const auto& r : rows)
      if (r.suite == suite) out.push_back(&r);
    return out;
  };

  if (auto bin = rows_of("binary"); !bin.empty()) {
    auto f = detail::open_out(dir / "f1_vs_qprime.csv");
    f << "classifier,balance_mode,balance_value,mean_f1,std_f1,runs,failed\n";
    for (const auto* r : bin)
      f << r->classifier << ',' << r->balance_mode << ',' << r->balance_value << ','
        << detail::mean_or_blank(*r, r->positive_f1) << ',' << r->runs << ',' << r->failed << '\n';
    written.push_back("f1_vs_qprime.csv");
  }
  if (auto mc = rows_of("multiclass"); !mc.empty()) {
    auto f = detail::open_out(dir / "accuracy_vs_size.csv");
    f << "classifier,dataset,n_evs,samples_per_ev,mean_accuracy,std_accuracy,mean_macro_f1,std_macro_f1,runs,failed\n";
    for (const auto* r : mc)
      f << r->classifier << ',' << detail::csv_escape(r->dataset) << ',' << r->n_evs << ',' << r->samples_per_ev << ','
        << detail::mean_or_blank(*r, r->accuracy) << ',' << detail::mean_or_blank(*r, r->macro_f1) << ',' << r->runs
        << ',' << r->failed << '\n';
    written.push_back("accuracy_vs_size.csv");
  }
  if (auto g = rows_of("grid"); !g.empty()) {
    std::set<std::size_t> samples;
    std::map<std::pair<std::string, std::size_t>, std::map<std::size_t, const SummaryRow*>> grid;
    for (const auto* r : g) {
      samples.insert(r->samples_per_ev);
      // n_evs in the key is the requested count, carried in the dataset name
      const std::size_t evs = std::stoul(r->dataset.substr(0, r->dataset.find("evs")));
      grid[{r->classifier, evs}][r->samples_per_ev] = r;
    }
    auto f = detail::open_out(dir / "accuracy_grid.csv");
    f << "classifier,n_evs";
    for (auto s : samples) f << ",samples_" << s;
    f << '\n';
    for (const auto& [key, row] : grid) {
      f << key.first << ',' << key.second;
      for (auto s : samples) {
        auto it = row.find(s);
        f << ',';
        if (it != row.end() && it->second->runs) f << detail::fixed6(it->second->accuracy.mean);
      }
      f << '\n';
    }
    written.push_back("accuracy_grid.csv");
  }
  if (auto d = rows_of("distribution"); !d.empty()) {
    auto f = detail::open_out(dir / "accuracy_vs_distribution.csv");
    f << "classifier,shape,n_evs,mean_accuracy,std_accuracy,mean_macro_f1,std_macro_f1,runs,failed\n";
    for (const auto* r : d)
      f << r->classifier << ',' << r->dataset << ',' << r->n_evs << ',' << detail::mean_or_blank(*r, r->accuracy)
        << ',' << detail::mean_or_blank(*r, r->macro_f1) << ',' << r->runs << ',' << r->failed << '\n';
    written.push_back("accuracy_vs_distribution.csv");
  }
  {
    auto f = detail::open_out(dir / "summary.md");
    write_summary_md(f, rows);
    written.push_back("summary.md");
  }
  return written;
}

inline std::vector<CellRecord> load_cells(const std::filesystem::path& in_dir) {
  const auto path = in_dir / "cells.csv";
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::io, "missing " + path.string());
  return read_cells(f);
}

}  // namespace evprof

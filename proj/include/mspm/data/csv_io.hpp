#pragma once

#include <algorithm>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mspm/core/error.hpp"
#include "mspm/core/text.hpp"
#include "mspm/data/types.hpp"

namespace mspm::data {

namespace detail {

inline std::vector<std::string_view> split_lines(std::string_view content) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= content.size()) {
    auto pos = content.find('\n', start);
    if (pos == std::string_view::npos) pos = content.size();
    auto line = content.substr(start, pos - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = pos + 1;
  }
  while (!lines.empty() && text::trim(lines.back()).empty()) lines.pop_back();
  return lines;
}

inline DataError row_error(const std::string& source, std::size_t line, const std::string& what) {
  return DataError(source + ":" + std::to_string(line) + ": " + what);
}

inline void expect_header(std::string_view header, const std::vector<std::string_view>& expected,
                          const std::string& source) {
  auto cols = text::split_csv(header);
  if (cols != expected) {
    std::string want;
    for (std::size_t i = 0; i < expected.size(); ++i) want += (i ? "," : "") + std::string(expected[i]);
    throw row_error(source, 1, "header must be '" + want + "'");
  }
}

template <class Row>
void sort_and_reject_duplicates(std::vector<Row>& rows, const std::string& source) {
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.date < b.date; });
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].date == rows[i - 1].date) {
      throw DataError(source + ": duplicated date " + rows[i].date.to_string());
    }
  }
}

}  // namespace detail

inline const std::vector<std::string_view>& price_header() {
  static const std::vector<std::string_view> h{"date", "open", "high", "low", "close", "volume"};
  return h;
}

inline const std::vector<std::string_view>& sentiment_header() {
  static const std::vector<std::string_view> h{"date", "sentiment", "news_buzz"};
  return h;
}

/// Parses a `date,open,high,low,close,volume` document. Rows come back date-sorted;
/// a repeated date is an error.
inline std::vector<AssetBar> parse_price_csv(std::string_view content, const std::string& source = "<prices>") {
  auto lines = detail::split_lines(content);
  if (lines.empty()) throw detail::row_error(source, 1, "missing header");
  detail::expect_header(lines[0], price_header(), source);
  std::vector<AssetBar> bars;
  bars.reserve(lines.size());
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    auto cols = text::split_csv(lines[i]);
    if (cols.size() != 6) throw detail::row_error(source, line_no, "expected 6 fields");
    AssetBar bar;
    try {
      bar.date = Date::parse(cols[0]);
    } catch (const DataError& e) {
      throw detail::row_error(source, line_no, e.what());
    }
    double* fields[5] = {&bar.open, &bar.high, &bar.low, &bar.close, &bar.volume};
    for (int k = 0; k < 5; ++k) {
      if (!text::parse_double(cols[k + 1], *fields[k])) {
        throw detail::row_error(source, line_no, "malformed number '" + std::string(cols[k + 1]) + "'");
      }
    }
    if (bar.open <= 0 || bar.high <= 0 || bar.low <= 0 || bar.close <= 0) {
      throw detail::row_error(source, line_no, "non-positive price");
    }
    if (bar.volume < 0) throw detail::row_error(source, line_no, "negative volume");
    if (bar.low > std::min(bar.open, bar.close) || bar.high < std::max(bar.open, bar.close)) {
      throw detail::row_error(source, line_no, "inconsistent high/low range");
    }
    bars.push_back(bar);
  }
  detail::sort_and_reject_duplicates(bars, source);
  return bars;
}

/// Parses a `date,sentiment,news_buzz` document with range checks on both scores.
inline std::vector<SentimentRecord> parse_sentiment_csv(std::string_view content,
                                                        const std::string& source = "<sentiment>") {
  auto lines = detail::split_lines(content);
  if (lines.empty()) throw detail::row_error(source, 1, "missing header");
  detail::expect_header(lines[0], sentiment_header(), source);
  std::vector<SentimentRecord> rows;
  rows.reserve(lines.size());
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    auto cols = text::split_csv(lines[i]);
    if (cols.size() != 3) throw detail::row_error(source, line_no, "expected 3 fields");
    SentimentRecord rec;
    try {
      rec.date = Date::parse(cols[0]);
    } catch (const DataError& e) {
      throw detail::row_error(source, line_no, e.what());
    }
    if (!text::parse_double(cols[1], rec.sentiment) || !text::parse_double(cols[2], rec.news_buzz)) {
      throw detail::row_error(source, line_no, "malformed number");
    }
    if (rec.sentiment < kSentimentMin || rec.sentiment > kSentimentMax) {
      throw detail::row_error(source, line_no, "sentiment " + std::string(cols[1]) + " outside [-5, 5]");
    }
    if (rec.news_buzz < kNewsBuzzMin || rec.news_buzz > kNewsBuzzMax) {
      throw detail::row_error(source, line_no, "news_buzz " + std::string(cols[2]) + " outside [1, 10]");
    }
    rows.push_back(rec);
  }
  detail::sort_and_reject_duplicates(rows, source);
  return rows;
}

inline std::vector<AssetBar> load_price_csv(const std::string& path) {
  std::string content;
  for (const auto& l : text::read_lines(path)) content += l + "\n";
  return parse_price_csv(content, path);
}

inline std::vector<SentimentRecord> load_sentiment_csv(const std::string& path) {
  std::string content;
  for (const auto& l : text::read_lines(path)) content += l + "\n";
  return parse_sentiment_csv(content, path);
}

inline std::string price_csv(const std::vector<AssetBar>& bars) {
  std::ostringstream out;
  out << "date,open,high,low,close,volume\n";
  for (const auto& b : bars) {
    out << b.date.to_string() << ',' << text::format_double(b.open) << ',' << text::format_double(b.high) << ','
        << text::format_double(b.low) << ',' << text::format_double(b.close) << ','
        << text::format_double(b.volume) << '\n';
  }
  return out.str();
}

/// Writes only non-imputed records; gap filling is re-derived on load.
inline std::string sentiment_csv(const std::vector<SentimentRecord>& rows) {
  std::ostringstream out;
  out << "date,sentiment,news_buzz\n";
  for (const auto& r : rows) {
    if (r.imputed) continue;
    out << r.date.to_string() << ',' << text::format_double(r.sentiment) << ','
        << text::format_double(r.news_buzz) << '\n';
  }
  return out.str();
}

/// Full series (normalized or raw) in one table, used for stage hand-off:
/// `date,open,high,low,close,volume,sentiment,news_buzz,imputed`.
inline std::string series_csv(const AssetSeries& s) {
  if (s.sentiments.size() != s.bars.size()) throw DataError(s.symbol + ": series sentiment not aligned with bars");
  std::ostringstream out;
  out << "date,open,high,low,close,volume,sentiment,news_buzz,imputed\n";
  for (std::size_t i = 0; i < s.bars.size(); ++i) {
    const auto& b = s.bars[i];
    const auto& r = s.sentiments[i];
    out << b.date.to_string() << ',' << text::format_double(b.open) << ',' << text::format_double(b.high) << ','
        << text::format_double(b.low) << ',' << text::format_double(b.close) << ','
        << text::format_double(b.volume) << ',' << text::format_double(r.sentiment) << ','
        << text::format_double(r.news_buzz) << ',' << (r.imputed ? 1 : 0) << '\n';
  }
  return out.str();
}

inline AssetSeries parse_series_csv(std::string_view content, const std::string& symbol,
                                    const std::string& source = "<series>") {
  auto lines = detail::split_lines(content);
  if (lines.empty()) throw detail::row_error(source, 1, "missing header");
  detail::expect_header(lines[0],
                        {"date", "open", "high", "low", "close", "volume", "sentiment", "news_buzz", "imputed"},
                        source);
  AssetSeries s;
  s.symbol = symbol;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto cols = text::split_csv(lines[i]);
    if (cols.size() != 9) throw detail::row_error(source, i + 1, "expected 9 fields");
    AssetBar b;
    SentimentRecord r;
    b.date = Date::parse(cols[0]);
    r.date = b.date;
    double v[7];
    for (int k = 0; k < 7; ++k) {
      if (!text::parse_double(cols[k + 1], v[k])) throw detail::row_error(source, i + 1, "malformed number");
    }
    b.open = v[0];
    b.high = v[1];
    b.low = v[2];
    b.close = v[3];
    b.volume = v[4];
    r.sentiment = v[5];
    r.news_buzz = v[6];
    r.imputed = text::trim(cols[8]) == "1";
    s.bars.push_back(b);
    s.sentiments.push_back(r);
  }
  return s;
}

}  // namespace mspm::data

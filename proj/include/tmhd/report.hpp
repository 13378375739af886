#pragma once

#include <map>
#include <string>
#include <vector>

namespace tmhd {

/// One verification row: a named check with its measured value, the
/// reference it is held against, and a provenance tag.
struct ReportRow {
    std::string check;
    std::string status;  // pass | fail | info
    double measured = 0;
    double reference = 0;
    double tolerance = 0;
    std::string tag;
};

class Report {
  public:
    void add_check(const std::string& name, double measured, double reference, double tolerance,
                   const std::string& tag, bool pass);
    /// Convenience: pass iff |measured - reference| <= tolerance.
    void check_close(const std::string& name, double measured, double reference, double tolerance,
                     const std::string& tag);
    /// Convenience: pass iff measured <= bound.
    void check_below(const std::string& name, double measured, double bound,
                     const std::string& tag);
    void info(const std::string& name, double measured, const std::string& tag);
    void meta(const std::string& key, const std::string& value);

    bool all_pass() const;
    std::size_t size() const { return rows_.size(); }
    const std::vector<ReportRow>& rows() const { return rows_; }

    std::string to_csv() const;   // fixed columns: check,status,measured,reference,tolerance,tag
    std::string to_json() const;
    /// Human-readable lines, one per row.
    std::string to_text() const;

  private:
    std::vector<ReportRow> rows_;
    std::map<std::string, std::string> meta_;
};

}  // namespace tmhd

#pragma once

// Source positions and diagnostics. Every AST node carries a SourceSpan so
// that verification failures can point at the statement that caused them;
// the mutation suite asserts on those line numbers.

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace kaisar {

struct SourceSpan {
  int line = 0;    // 1-based; 0 = unknown/synthesized
  int column = 0;  // 1-based
  int endLine = 0;
  int endColumn = 0;

  bool known() const { return line > 0; }
  static SourceSpan join(const SourceSpan& a, const SourceSpan& b) {
    if (!a.known()) return b;
    if (!b.known()) return a;
    SourceSpan s = a;
    if (b.endLine > s.endLine || (b.endLine == s.endLine && b.endColumn > s.endColumn)) {
      s.endLine = b.endLine;
      s.endColumn = b.endColumn;
    }
    return s;
  }
};

enum class Severity { Error, Warning, Note };

struct Diagnostic {
  Severity severity = Severity::Error;
  SourceSpan span;
  std::string message;
};

class DiagnosticBag {
 public:
  void error(SourceSpan span, std::string msg) {
    items_.push_back({Severity::Error, span, std::move(msg)});
  }
  void warning(SourceSpan span, std::string msg) {
    items_.push_back({Severity::Warning, span, std::move(msg)});
  }
  void note(SourceSpan span, std::string msg) {
    items_.push_back({Severity::Note, span, std::move(msg)});
  }

  bool hasErrors() const {
    for (const auto& d : items_) {
      if (d.severity == Severity::Error) return true;
    }
    return false;
  }
  const std::vector<Diagnostic>& items() const { return items_; }
  void append(const DiagnosticBag& other) {
    items_.insert(items_.end(), other.items_.begin(), other.items_.end());
  }

  std::string render(const std::string& filename) const {
    std::ostringstream os;
    for (const auto& d : items_) {
      os << filename << ':';
      if (d.span.known()) os << d.span.line << ':' << d.span.column << ':';
      switch (d.severity) {
        case Severity::Error: os << " error: "; break;
        case Severity::Warning: os << " warning: "; break;
        case Severity::Note: os << " note: "; break;
      }
      os << d.message << '\n';
    }
    return os.str();
  }

 private:
  std::vector<Diagnostic> items_;
};

// Thrown by internal passes when a diagnostic has already been recorded and
// the pass cannot continue on this document.
struct CheckAbort {};

}  // namespace kaisar

#pragma once

#include <cstdio>
#include <cstdlib>
#include <string>

namespace speakbox {

enum class LogLevel { Debug = 0, Info = 1, Warn = 2, Error = 3, Off = 4 };

// Level comes from the SPEAKBOX_LOG environment variable; default is warn.
inline LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("SPEAKBOX_LOG");
        if (!env) return LogLevel::Warn;
        std::string v(env);
        if (v == "debug") return LogLevel::Debug;
        if (v == "info") return LogLevel::Info;
        if (v == "warn") return LogLevel::Warn;
        if (v == "error") return LogLevel::Error;
        if (v == "off" || v == "none") return LogLevel::Off;
        return LogLevel::Warn;
    }();
    return level;
}

inline void log_at(LogLevel level, const char* tag, const std::string& msg) {
    if (level < log_level()) return;
    std::string line = "[speakbox] ";
    line += tag;
    line += ": ";
    line += msg;
    line += '\n';
    std::fputs(line.c_str(), stderr);
}

inline void log_debug(const std::string& msg) { log_at(LogLevel::Debug, "debug", msg); }
inline void log_info(const std::string& msg) { log_at(LogLevel::Info, "info", msg); }
inline void log_warn(const std::string& msg) { log_at(LogLevel::Warn, "warn", msg); }
inline void log_error(const std::string& msg) { log_at(LogLevel::Error, "error", msg); }

}  // namespace speakbox

#pragma once

#include <stdexcept>
#include <string>

namespace envmon {

enum class Err {
    NegativeDiscriminant,
    Underdetermined,
    InsufficientData,
    SingularFit,
    RangeUnreachable,
    EmptyReadings,
    UnstableBath,
    RampTooFast,
    BadSweepData,
    NoSuchDevice,
    FlashWhileShorted,
    NoSuchPort,
    OutOfOrder,
    CorruptArchive,
    NoSuchArchive,
    LineTooLong,
    InvalidRecord,
    BadConfig,
    IoError,
};

inline const char* err_name(Err e) {
    switch (e) {
        case Err::NegativeDiscriminant: return "NegativeDiscriminant";
        case Err::Underdetermined: return "Underdetermined";
        case Err::InsufficientData: return "InsufficientData";
        case Err::SingularFit: return "SingularFit";
        case Err::RangeUnreachable: return "RangeUnreachable";
        case Err::EmptyReadings: return "EmptyReadings";
        case Err::UnstableBath: return "UnstableBath";
        case Err::RampTooFast: return "RampTooFast";
        case Err::BadSweepData: return "BadSweepData";
        case Err::NoSuchDevice: return "NoSuchDevice";
        case Err::FlashWhileShorted: return "FlashWhileShorted";
        case Err::NoSuchPort: return "NoSuchPort";
        case Err::OutOfOrder: return "OutOfOrder";
        case Err::CorruptArchive: return "CorruptArchive";
        case Err::NoSuchArchive: return "NoSuchArchive";
        case Err::LineTooLong: return "LineTooLong";
        case Err::InvalidRecord: return "InvalidRecord";
        case Err::BadConfig: return "BadConfig";
        case Err::IoError: return "IoError";
    }
    return "UnknownError";
}

class Error : public std::runtime_error {
public:
    Error(Err code, const std::string& what)
        : std::runtime_error(std::string(err_name(code)) + ": " + what), code_(code) {}

    Err code() const { return code_; }

private:
    Err code_;
};

}  // namespace envmon

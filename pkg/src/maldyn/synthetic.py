"""Deterministic synthetic sandbox corpus for tests and demos.

Malware samples come from four planted families, each built around its own
API motif, characteristic return codes and extra-info strings. Later years
increasingly swap motif calls for "evolved" variants so time partitions
drift apart. Benign samples draw from a separate API pool.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .behavior_log import Action, BehaviorLog, Manifest, ManifestEntry, to_xml, write_manifest

SHARED_APIS = (
    "NtOpenFile", "NtReadFile", "NtClose", "LdrLoadDll", "LdrGetProcedureAddress",
    "NtQueryInformationProcess", "RegOpenKeyExW", "RegQueryValueExW",
    "NtAllocateVirtualMemory", "NtFreeVirtualMemory", "GetSystemTimeAsFileTime", "NtDelayExecution",
)
BENIGN_APIS = (
    "CreateWindowExW", "GetMessageW", "DispatchMessageW", "SHGetFolderPathW", "GdiplusStartup",
    "NtWriteFile", "RegCloseKey", "GetCommandLineW", "LoadStringW", "DrawTextW",
)
BENIGN_EXINFO = ("user32.dll", "gdi32.dll", "C:\\Program Files\\App\\config.ini", "comctl32.dll")


@dataclass(frozen=True)
class Family:
    name: str
    motif: tuple[str, ...]
    evolved: dict
    rets: tuple[int, ...]
    exinfo: tuple[str, ...]


FAMILIES = (
    Family("worm",
           ("NtCreateFile", "WriteProcessMemory", "CreateRemoteThread", "InternetOpenA", "connect", "send"),
           {"InternetOpenA": "WSAStartup", "send": "WSASend"},
           (0, 0xC0000022), ("ws2_32.dll", "\\\\share\\payload.exe")),
    Family("ransom",
           ("FindFirstFileW", "CryptGenKey", "CryptEncrypt", "MoveFileExW", "DeleteFileW", "FindNextFileW"),
           {"CryptEncrypt": "BCryptEncrypt", "CryptGenKey": "BCryptGenerateSymmetricKey"},
           (0, 0x80070005), ("advapi32.dll", "C:\\Users\\README_DECRYPT.txt")),
    Family("trojan",
           ("RegSetValueExA", "SetWindowsHookExA", "GetAsyncKeyState", "InternetOpenUrlA", "HttpSendRequestA",
            "ExitWindowsEx"),
           {"SetWindowsHookExA": "SetWindowsHookExW", "HttpSendRequestA": "WinHttpSendRequest"},
           (0, 0xC0000034), ("wininet.dll", "reboot")),
    Family("dropper",
           ("URLDownloadToFileW", "CreateProcessInternalW", "NtMapViewOfSection", "VirtualProtectEx",
            "NtResumeThread", "ShellExecuteExW"),
           {"URLDownloadToFileW": "BITSAdminJob", "VirtualProtectEx": "NtProtectVirtualMemory"},
           (0, 0xC0000005), ("urlmon.dll", "C:\\Windows\\Temp\\svch0st.exe")),
)

# malware per year, proportional to the 2009-2018 sample timeline
YEAR_WEIGHTS = {2009: 362, 2010: 62, 2011: 1481, 2012: 4892, 2013: 4465,
                2014: 8282, 2015: 5859, 2016: 6406, 2017: 6219, 2018: 5804}


def _segment_malware(fam: Family, year: int, rng: np.random.Generator, n: int) -> list[tuple[str, int, str | None]]:
    drift = 0.85 * (year - 2009) / 9
    out: list[tuple[str, int, str | None]] = []
    while len(out) < n:
        if rng.random() < 0.7:
            for api in fam.motif:
                if rng.random() < 0.1:
                    continue
                if api in fam.evolved and rng.random() < drift:
                    api = fam.evolved[api]
                ret = int(rng.choice(fam.rets))
                ex = str(rng.choice(fam.exinfo)) if rng.random() < 0.4 else None
                out.append((api, ret, ex))
        else:
            for _ in range(int(rng.integers(1, 4))):
                out.append((str(rng.choice(SHARED_APIS)), 0, None))
    return out[:n]


def _segment_benign(rng: np.random.Generator, n: int) -> list[tuple[str, int, str | None]]:
    own = tuple(rng.choice(BENIGN_APIS, 4, replace=False))
    out: list[tuple[str, int, str | None]] = []
    while len(out) < n:
        pool = own if rng.random() < 0.6 else SHARED_APIS
        api = str(rng.choice(pool))
        if rng.random() < 0.02:
            # installers occasionally request a restart or write to another process
            api = str(rng.choice(("ExitWindowsEx", "WriteProcessMemory", "DeleteFileW")))
        ret = 0 if rng.random() < 0.95 else 2
        ex = str(rng.choice(BENIGN_EXINFO)) if rng.random() < 0.3 else None
        out.append((api, ret, ex))
    return out


def make_log(sample_id: str, label: str, family: Family | None, year: int, rng: np.random.Generator) -> BehaviorLog:
    n_proc = int(rng.integers(1, 4))
    length = int(rng.integers(80, 220))
    sizes = np.diff(np.sort(np.r_[0, rng.choice(np.arange(1, length), n_proc - 1, replace=False), length]))
    t = 1_000_000 + int(rng.integers(0, 10_000))
    pid = int(rng.integers(1000, 5000))
    actions = []
    for size in sizes:
        pid += int(rng.integers(4, 400))
        caller = f"{family.name}_{pid % 7}.exe" if family else f"app{pid % 5}.exe"
        calls = _segment_malware(family, year, rng, int(size)) if family else _segment_benign(rng, int(size))
        for api, ret, ex in calls:
            t += int(rng.integers(1, 40)) if rng.random() < 0.95 else int(rng.integers(200, 2000))
            n_args = int(rng.integers(0, 4))
            actions.append(Action(
                api_name=api, call_name=caller, call_pid=pid, call_time=t,
                err_code=0 if ret == 0 else int(rng.integers(1, 200)),
                ret_value=ret, status_value=1 if ret == 0 else 0,
                api_args=tuple(f"arg{j}_{int(rng.integers(0, 16)):x}" for j in range(n_args)),
                ex_info=(ex,) if ex else (),
            ))
    return BehaviorLog(sample_id, tuple(actions))


def make_synthetic_corpus(out_dir, n_samples: int = 200, seed: int = 42, malware_fraction: float = 0.6) -> Manifest:
    """Write ``logs/<id>.xml`` and ``manifest.csv`` under ``out_dir``."""
    rng = np.random.default_rng(seed)
    out = Path(out_dir)
    (out / "logs").mkdir(parents=True, exist_ok=True)
    n_mal = int(round(n_samples * malware_fraction))
    years = np.array(sorted(YEAR_WEIGHTS))
    w = np.array([YEAR_WEIGHTS[y] for y in years], dtype=float)
    specs = []
    for i in range(n_mal):
        specs.append(("malware", FAMILIES[i % len(FAMILIES)], int(rng.choice(years, p=w / w.sum()))))
    for _ in range(n_samples - n_mal):
        specs.append(("benign", None, int(rng.integers(2009, 2019))))
    order = rng.permutation(len(specs))
    entries = []
    for idx, k in enumerate(order):
        label, fam, year = specs[k]
        sid = f"s{idx:04d}"
        log = make_log(sid, label, fam, year, rng)
        rel = f"logs/{sid}.xml"
        (out / rel).write_bytes(to_xml(log))
        entries.append(ManifestEntry(sid, rel, label, fam.name if fam else None, year))
    manifest = Manifest(tuple(entries), str(out))
    write_manifest(manifest, out / "manifest.csv")
    return manifest

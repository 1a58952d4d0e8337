"""Download the files listed in a URL manifest."""

from __future__ import annotations

import logging
import os
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional
from urllib.parse import unquote, urlparse

import requests

log = logging.getLogger(__name__)

MAX_ATTEMPTS = 3


@dataclass
class FetchReport:
    downloaded: list[Path] = field(default_factory=list)
    skipped: list[Path] = field(default_factory=list)
    errors: dict[str, str] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.errors


class FetchError(RuntimeError):
    def __init__(self, message: str, status: Optional[int] = None):
        super().__init__(message)
        self.status = status


def read_manifest(text: str) -> list[str]:
    """One URL per line; blank lines and ``#`` comments are ignored."""
    urls = []
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            urls.append(line)
    return urls


def _target_name(url: str) -> str:
    name = unquote(Path(urlparse(url).path).name)
    if not name:
        raise FetchError(f"cannot derive a file name from {url}")
    return name


def _fetch_one(session, url, dest: Path, headers, timeout) -> bool:
    """Download ``url`` into ``dest``; return False when skipped."""
    if dest.exists():
        head = session.head(url, headers=headers, timeout=timeout, allow_redirects=True)
        size = head.headers.get("Content-Length")
        if head.ok and size is not None and int(size) == dest.stat().st_size:
            return False

    with session.get(url, headers=headers, timeout=timeout, stream=True) as resp:
        if not 200 <= resp.status_code < 300:
            raise FetchError(f"HTTP {resp.status_code} for {url}", resp.status_code)
        fd, tmp = tempfile.mkstemp(dir=dest.parent, prefix=f".{dest.name}.", suffix=".part")
        try:
            with os.fdopen(fd, "wb") as fh:
                for chunk in resp.iter_content(chunk_size=1 << 16):
                    fh.write(chunk)
            os.replace(tmp, dest)
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise
    return True


def fetch(
    manifest: str,
    auth_token: Optional[str],
    dest_dir,
    timeout: float = 60.0,
    backoff: float = 1.0,
    session: Optional[requests.Session] = None,
) -> FetchReport:
    """Fetch every URL of ``manifest`` (manifest text) into ``dest_dir``.

    The token, when given, goes out as a bearer ``Authorization`` header.
    Files land atomically via a temporary file and rename; an existing file
    whose size matches the server's ``Content-Length`` is skipped. Network
    errors and 5xx responses are retried up to three attempts with
    exponential backoff; other non-2xx statuses fail immediately. Failures
    are collected per URL in the returned report.
    """
    dest_dir = Path(dest_dir)
    dest_dir.mkdir(parents=True, exist_ok=True)
    headers = {"Authorization": f"Bearer {auth_token}"} if auth_token else {}
    session = session or requests.Session()
    report = FetchReport()

    for url in read_manifest(manifest):
        try:
            dest = dest_dir / _target_name(url)
        except FetchError as exc:
            report.errors[url] = str(exc)
            continue
        for attempt in range(MAX_ATTEMPTS):
            try:
                if _fetch_one(session, url, dest, headers, timeout):
                    report.downloaded.append(dest)
                else:
                    report.skipped.append(dest)
                break
            except FetchError as exc:
                retryable = exc.status is not None and exc.status >= 500
                if not retryable or attempt == MAX_ATTEMPTS - 1:
                    report.errors[url] = str(exc)
                    break
            except (requests.RequestException, OSError) as exc:
                if attempt == MAX_ATTEMPTS - 1:
                    report.errors[url] = f"{type(exc).__name__}: {exc}"
                    break
            delay = backoff * 2**attempt
            log.warning("retrying %s in %.1fs", url, delay)
            time.sleep(delay)
    return report

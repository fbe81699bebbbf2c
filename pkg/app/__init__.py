"""SEC-NoSQL: encrypting proxy, replicated store simulator, benchmark and SLA fitting."""
